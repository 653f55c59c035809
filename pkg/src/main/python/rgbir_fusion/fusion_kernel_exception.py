"""Error raised by the fusion kernels, the weight file codec and the harness"""
from typing import Optional


class FusionKernelException(Exception):
    """
    A kernel, weight or fixture operation refused its input: a shape or
    config mismatch, a malformed weight file, or a non-finite tensor.
    ``operation`` names the rejecting kernel when it is known.
    """
    def __init__(self, message: str, operation: Optional[str] = None):
        self.__message = message
        self.__operation = operation
        super().__init__(self.message)

    @property
    def message(self) -> str:
        """gets the message value"""
        return self.__message

    @message.setter
    def message(self, value: str):
        self.__message = value

    @property
    def operation(self) -> Optional[str]:
        """name of the kernel that raised, or None"""
        return self.__operation
