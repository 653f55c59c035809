"""Golden fixture record"""
import hashlib
import struct
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from rgbir_fusion.fusion_kernel_exception import FusionKernelException

DIGEST_HEX_CHARS = 16
VALUE_FORMAT = "%.17g"


def canonical_digest(outputs: dict) -> str:
    """64-bit SHA-256 prefix of name, shape and little-endian float64 data, in sorted name order."""
    sha = hashlib.sha256()
    for name in sorted(outputs):
        tensor = np.asarray(outputs[name], dtype=np.float64)
        sha.update(name.encode("utf-8") + b"\0")
        sha.update(struct.pack(f"<I{tensor.ndim}I", tensor.ndim, *tensor.shape))
        sha.update(tensor.astype("<f8").tobytes())
    return sha.hexdigest()[:DIGEST_HEX_CHARS]


class FixtureCase:
    """
    Stored output tensors of one seeded computation, with the tolerances
    used when they are recomputed and the digest of their canonical bytes.
    """
    def __init__(self, name: str, seed: int, input_shapes: dict, outputs: dict,
                 atol: float = 0.0, rtol: float = 0.0, generated_at: Optional[float] = None):
        if atol < 0 or rtol < 0:
            raise FusionKernelException(f"Fixture {name}: tolerances must be non-negative")
        self.__name = name
        self.__seed = seed
        self.__input_shapes = {key: list(shape) for key, shape in input_shapes.items()}
        self.__outputs = {key: np.asarray(value, dtype=np.float64)
                          for key, value in outputs.items()}
        self.__atol = atol
        self.__rtol = rtol
        self.__generated_at = (datetime.timestamp(datetime.now(timezone.utc))
                               if generated_at is None else generated_at)

    @property
    def name(self) -> str:
        """Case name, also the fixture file stem."""
        return self.__name

    @property
    def seed(self) -> int:
        """Seed of the weights and inputs."""
        return self.__seed

    @property
    def input_shapes(self) -> dict:
        """Input name -> shape list."""
        return self.__input_shapes

    @property
    def outputs(self) -> dict:
        """Output name -> expected tensor."""
        return self.__outputs

    @property
    def atol(self) -> float:
        """Absolute tolerance used on recomputation."""
        return self.__atol

    @property
    def rtol(self) -> float:
        """Relative tolerance used on recomputation."""
        return self.__rtol

    @property
    def generated_at(self) -> float:
        """Timestamp of when the case was generated."""
        return self.__generated_at

    @property
    def digest(self) -> str:
        """Digest of the expected outputs"""
        return canonical_digest(self.__outputs)

    def max_error(self, actual: dict) -> float:
        """Largest tolerance-normalized deviation of ``actual``; <= 1 means within tolerance."""
        worst = 0.0
        for key, expected in self.__outputs.items():
            if key not in actual or np.shape(actual[key]) != expected.shape:
                return float("inf")
            deviation = np.abs(np.asarray(actual[key]) - expected)
            allowed = self.__atol + self.__rtol * np.abs(expected)
            exceeded = deviation > allowed
            if np.any(exceeded & (allowed == 0)):
                return float("inf")
            if np.any(allowed > 0):
                worst = max(worst, float(np.max(deviation[allowed > 0] / allowed[allowed > 0])))
        return worst

    def to_json(self) -> dict:
        """Returns a JSON-serializable dictionary of the case"""
        return {
            "name": self.__name,
            "seed": self.__seed,
            "input_shapes": self.__input_shapes,
            "atol": self.__atol,
            "rtol": self.__rtol,
            "generated_at": self.__generated_at,
            "digest": self.digest,
            "outputs": {key: {"shape": list(value.shape),
                              "values": [VALUE_FORMAT % item for item in value.ravel()]}
                        for key, value in self.__outputs.items()},
        }

    @classmethod
    def from_json(cls, record: dict) -> "FixtureCase":
        """Rebuilds a case from its to_json form (the stored digest is not trusted)."""
        try:
            outputs = {key: np.array([float(item) for item in entry["values"]],
                                     dtype=np.float64).reshape(entry["shape"])
                       for key, entry in record["outputs"].items()}
            return cls(record["name"], record["seed"], record["input_shapes"], outputs,
                       record["atol"], record["rtol"], record["generated_at"])
        except (KeyError, TypeError, ValueError) as ex:
            raise FusionKernelException("Error - Invalid fixture record") from ex
