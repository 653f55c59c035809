"""Common utility functions for file I/O"""
import json
import os

from rgbir_fusion.fusion_kernel_exception import FusionKernelException


def write_json(file_path: str, data) -> None:
    """Write JSON data to file."""
    try:
        with open(file_path, "w", encoding="utf-8", newline="") as file:
            json.dump(data, file, indent=2)
    except OSError as ex:
        raise FusionKernelException("Wrong file or file path") from ex


def load_json_strict(file_path: str):
    """Load JSON from file, raising exceptions if file not found or invalid JSON."""
    if not os.path.isfile(file_path):
        raise FusionKernelException("Error: file input not found")
    try:
        with open(file_path, "r", encoding="utf-8", newline="") as file:
            return json.load(file)
    except json.JSONDecodeError as ex:
        raise FusionKernelException("JSON Decode Error - Wrong JSON Format") from ex


def parse_int_list(text: str) -> list:
    """'1024,2048' -> [1024, 2048]"""
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError as ex:
        raise FusionKernelException(
            f"Expected a comma-separated integer list, got {text!r}") from ex


def parse_float_list(text: str) -> list:
    """'0.3,0.5' -> [0.3, 0.5]"""
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as ex:
        raise FusionKernelException(
            f"Expected a comma-separated number list, got {text!r}") from ex


def parse_size(text: str) -> tuple:
    """'256x128' -> (256, 128); a single number means a square size."""
    parts = text.lower().split("x")
    try:
        extents = tuple(int(part) for part in parts)
    except ValueError as ex:
        raise FusionKernelException(f"Size must look like HxW, got {text!r}") from ex
    if len(extents) == 1:
        extents = extents * 2
    if len(extents) != 2:
        raise FusionKernelException(f"Size must look like HxW, got {text!r}")
    return extents
