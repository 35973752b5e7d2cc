"""Load disaggregation for chaotically switched RLC networks.

The aggregate RMS current of a network of on/off loads is mapped back to the
joint switch state with a Gaussian kernel expansion trained by kernel-Adaline.
"""

from .chaos import (SwitchSchedule, ScheduleExhausted, binarize, build_schedule,
                    generate_sequence, logistic_step, switch_value)
from .circuit import (CircuitState, LoadSpec, NetworkConfig, NonFiniteState, SampledSeries,
                      Trajectory, default_network, derivatives, rk4_step, rms_series, simulate)
from .encoding import EncodingParams, bit_from_switch, decode, encode
from .kernel import (KernelModel, TrainingDivergence, TrainingSet, build_advance_vectors,
                     gaussian_kernel, mse, predict, train_kernel_adaline)

__version__ = "0.1.0"
