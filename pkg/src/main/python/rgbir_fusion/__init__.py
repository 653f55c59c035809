"""RGB-INFRARED FUSION KERNELS: SELECTIVE SCANS, CEI GATING, PYRAMID FUSION, ADAPTERS"""
import os

# single-threaded BLAS unless the caller chose otherwise; numpy reads these on import
for _variable in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_variable, "1")

# pylint: disable=wrong-import-position

from rgbir_fusion.fusion_kernel_exception import FusionKernelException
from rgbir_fusion.fusion_config import (FIXTURES_PATH,
                                        ADAPTER_DIM,
                                        DEFAULT_RHO,
                                        LOW_RANK,
                                        CHANNEL_GROUPS,
                                        STATE_DIM,
                                        HIDDEN_DIM,
                                        EncoderConfig,
                                        ToyBackboneConfig)
from rgbir_fusion.tensor_core import (Tensor, ConvWeights, NormWeights, LinearWeights,
                                      conv2d, normalize, activate, resample,
                                      concat_channels, linear)
from rgbir_fusion.selective_scan import (ScanInputs, ScanGradients, DirectionParams,
                                         ss1d_scan, ss1d_backward, unfold_direction,
                                         fold_direction, ss2d)
from rgbir_fusion.region_scan import RegionSS2DWeights, init_region_ss2d, region_aware_ss2d
from rgbir_fusion.cei_module import ModalityPair, CEIWeights, init_cei, cei_forward
from rgbir_fusion.pyramid_fusion import (PyramidFeatures, MPFWeights, init_mpf, fuse_project,
                                         deep_attention, completion_branch, mpf_forward)
from rgbir_fusion.lfm_adapter import (AdapterWeights, SpectrumPair, init_adapter, project_in,
                                      spatial_expert, frequency_split, frequency_expert,
                                      router_fuse, adapter_forward, band_energy)
from rgbir_fusion.weight_store import (WeightStore, save_weights, load_weights,
                                       parameter_count)
from rgbir_fusion.encoder import (EncoderWeights, init_encoder_weights, encode,
                                  encoder_forward, parameter_report)
from rgbir_fusion.synthetic_inputs import synth_pair
from rgbir_fusion.fixture_case import FixtureCase
from rgbir_fusion.fixture_manager import FixtureManager
from rgbir_fusion.invariant_suite import run_invariant_suite
from rgbir_fusion.scan_benchmark import bench_scan
