"""
Shared array type aliases
"""
import numpy as np
import numpy.typing as npt
from typing_extensions import TypeAlias

RealArray: TypeAlias = npt.NDArray[np.float64]
ComplexArray: TypeAlias = npt.NDArray[np.complex128]
