"""Online stochastic kernel machine: consensus-coupled online kernel classification."""

__version__ = "0.1.0"

from .datagen import Regime, Sample, Stream, StreamConfig, gen_stream
from .evaluation import (Algorithm, BoundReport, RunTrace, SweepReport, mistake_bound,
                         paired_compare, run_experiment, run_sweep)
from .kernel import KernelBlock, KernelFamily, KernelSpec, build_kernel_block, kernel_eval
from .loss import hinge_loss, hinge_subgradient, regularized_risk, zero_one_loss
from .machine import (DivergenceError, OskmConfig, OskmState, WindowBuffer, oskm_init,
                      oskm_predict, oskm_step)
from .norma import NormaState, norma_predict, norma_update
