"""Golden fixture generation and verification"""
import logging
import os.path
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from rgbir_fusion.cei_module import ModalityPair, cei_forward, init_cei
from rgbir_fusion.encoder import encoder_forward, init_encoder_weights
from rgbir_fusion.fixture_case import FixtureCase
from rgbir_fusion.fusion_config import EncoderConfig
from rgbir_fusion.fusion_kernel_exception import FusionKernelException
from rgbir_fusion.gradient_check import random_scan_inputs
from rgbir_fusion.lfm_adapter import adapter_forward, init_adapter
from rgbir_fusion.pyramid_fusion import init_mpf, mpf_forward
from rgbir_fusion.selective_scan import ss1d_scan
from rgbir_fusion.synthetic_inputs import synth_pair
from rgbir_fusion.utils import load_json_strict, write_json
from rgbir_fusion.weight_store import store_from_weights

logger = logging.getLogger(__name__)

FIXTURE_HIDDEN_DIM = 32
FIXTURE_LEVEL_CHANNELS = (8, 16, 32)
FIXTURE_ENCODER_CONFIG = EncoderConfig(hidden_dim=FIXTURE_HIDDEN_DIM)


@dataclass(frozen=True)
class FixtureSpec:
    """How to recompute one case: its seed, tolerances and a builder."""
    name: str
    seed: int
    build: Callable[[int], tuple]
    atol: float = 0.0
    rtol: float = 0.0


@dataclass(frozen=True)
class FixtureResult:
    """Outcome of one case: written, pass, missing, digest_mismatch, tolerance_exceeded or error"""
    name: str
    status: str
    detail: str = ""

    @property
    def passed(self) -> bool:
        """True for written and pass"""
        return self.status in ("written", "pass")


def build_cei_case(seed: int) -> tuple:
    """Ones input at B=1, C=8, 16x16 through one seeded CEI block."""
    ones = np.ones((1, 8, 16, 16))
    out = cei_forward(ModalityPair(ones, ones.copy(), 3), init_cei(np.random.default_rng(seed), 8))
    return {"rgb": ones.shape, "ir": ones.shape}, {"rgb": out.rgb, "ir": out.ir}


def build_adapter_case(seed: int) -> tuple:
    """Random B=1, C=16, 16x16 input through one adapter with trained-like outputs."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(1, 16, 16, 16))
    out = adapter_forward(x, init_adapter(rng, 16, zero_outputs=False))
    return {"x": x.shape}, {"out": out}


def build_mpf_case(seed: int) -> tuple:
    """Random level features of a 64x64 input through a d=32 pyramid fusion."""
    rng = np.random.default_rng(seed)
    levels = []
    for level, (channels, size) in enumerate(zip(FIXTURE_LEVEL_CHANNELS, (8, 4, 2)), start=3):
        levels.append(ModalityPair(rng.normal(size=(1, channels, size, size)),
                                   rng.normal(size=(1, channels, size, size)), level))
    features = mpf_forward(levels, init_mpf(rng, FIXTURE_LEVEL_CHANNELS, FIXTURE_HIDDEN_DIM))
    shapes = {f"{m}{p.level}": p.rgb.shape for p in levels for m in ("rgb", "ir")}
    return shapes, features.as_dict()


def build_encoder_case(seed: int) -> tuple:
    """Synthetic 64x64 pair through the full encoder at d=32."""
    rgb, ir = synth_pair(seed, 64)
    store = store_from_weights(init_encoder_weights(FIXTURE_ENCODER_CONFIG))
    features = encoder_forward(rgb, ir, store, FIXTURE_ENCODER_CONFIG)
    return {"rgb": rgb.shape, "ir": ir.shape}, features.as_dict()


def build_scan_case(seed: int) -> tuple:
    """One random B=1, L=6, D=2, N=3 selective scan."""
    inputs = random_scan_inputs(np.random.default_rng(seed))
    return {"u": inputs.u.shape}, {"y": ss1d_scan(inputs)}


DEFAULT_FIXTURES = (
    FixtureSpec("ss1d_scan", 5, build_scan_case),
    FixtureSpec("cei_forward", 11, build_cei_case),
    FixtureSpec("adapter_forward", 12, build_adapter_case),
    FixtureSpec("mpf_forward", 13, build_mpf_case, atol=1e-12, rtol=1e-9),
    FixtureSpec("encoder_forward", 14, build_encoder_case, atol=1e-12, rtol=1e-9),
)


class FixtureManager:
    """Writes and re-checks the golden fixture files of one directory."""
    def __init__(self, directory: str, specs: Sequence[FixtureSpec] = DEFAULT_FIXTURES):
        self.__directory = directory
        self.__specs = tuple(specs)

    @property
    def directory(self) -> str:
        """Fixture directory"""
        return self.__directory

    @property
    def names(self) -> list:
        """Case names in run order"""
        return [spec.name for spec in self.__specs]

    def path_for(self, name: str) -> str:
        """File holding case ``name``."""
        return os.path.join(self.__directory, f"{name}.json")

    @staticmethod
    def compute(spec: FixtureSpec) -> FixtureCase:
        """Runs a case builder into a fresh FixtureCase."""
        shapes, outputs = spec.build(spec.seed)
        return FixtureCase(spec.name, spec.seed, shapes, outputs, spec.atol, spec.rtol)

    def generate(self) -> list:
        """Writes every case; the directory is created when absent."""
        try:
            os.makedirs(self.__directory, exist_ok=True)
        except OSError as ex:
            raise FusionKernelException(f"Wrong file or file path: {self.__directory}") from ex
        results = []
        for spec in self.__specs:
            case = self.compute(spec)
            write_json(self.path_for(spec.name), case.to_json())
            logger.info("Wrote fixture %s (digest %s)", spec.name, case.digest)
            results.append(FixtureResult(spec.name, "written", case.digest))
        return results

    def verify_case(self, spec: FixtureSpec) -> FixtureResult:
        """Recomputes one case and compares it with its file."""
        path = self.path_for(spec.name)
        if not os.path.isfile(path):
            return FixtureResult(spec.name, "missing", path)
        try:
            record = load_json_strict(path)
            stored = FixtureCase.from_json(record)
            if record.get("digest") != stored.digest:
                return FixtureResult(spec.name, "digest_mismatch",
                                     f"file says {record.get('digest')}, values hash to "
                                     f"{stored.digest}")
            fresh = self.compute(spec)
        except FusionKernelException as ex:
            return FixtureResult(spec.name, "error", ex.message)
        if fresh.digest == stored.digest:
            return FixtureResult(spec.name, "pass", "bit-exact")
        error = stored.max_error(fresh.outputs)
        if error <= 1.0:
            return FixtureResult(spec.name, "pass", f"within tolerance ({error:.3g})")
        return FixtureResult(spec.name, "tolerance_exceeded",
                             f"normalized error {error:.3g} (atol={stored.atol}, "
                             f"rtol={stored.rtol})")

    def verify(self, only: Optional[Sequence[str]] = None) -> list:
        """Verifies every case (or those named in ``only``); failures do not stop the run."""
        results = []
        for spec in self.__specs:
            if only is not None and spec.name not in only:
                continue
            result = self.verify_case(spec)
            log = logger.info if result.passed else logger.error
            log("Fixture %s: %s %s", spec.name, result.status, result.detail)
            results.append(result)
        return results
