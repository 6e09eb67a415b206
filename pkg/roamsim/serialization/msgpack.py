"""
Msgpack + lz4 serialization of nested training state: numpy arrays,
numpy scalars and registered dataclasses (recursively).

np.float64 subclasses float and goes through msgpack as a plain float.
"""
import dataclasses
import msgpack
import numpy as np
from abc import ABC, abstractmethod
from lz4.frame import compress as lz4_compress, decompress as lz4_decompress
from typing import Any

# Maximum byte lengths for str/ext
MAX_STR_LEN = 2147483647
MAX_EXT_LEN = 2147483647


REGISTRY = {'obj_types': {},
            'ext_types': {},
            'dataclasses': {}}


def register(obj_def):
    """
    Register a dataclass, or a handler with an obj_type and ext_type.
    Returns obj_def so it can be used as a class decorator.
    """
    if dataclasses.is_dataclass(obj_def):
        REGISTRY['dataclasses'][obj_def.__name__] = obj_def
        REGISTRY['obj_types'][obj_def] = DataclassHandler
        REGISTRY['ext_types'].setdefault(
            DataclassHandler.ext_type, DataclassHandler)
        return obj_def

    assert obj_def.obj_type is not None and obj_def.ext_type is not None, \
        f"{obj_def.__name__} needs obj_type and ext_type"
    known = REGISTRY['ext_types'].get(obj_def.ext_type)
    assert known in (None, obj_def), \
        f"ext_type {obj_def.ext_type} already taken by {known.__name__}"
    REGISTRY['obj_types'][obj_def.obj_type] = obj_def
    REGISTRY['ext_types'][obj_def.ext_type] = obj_def
    return obj_def


class AbstractHandler(ABC):
    ext_type: int = None  # Unique number
    obj_type: Any = None  # Unique object type

    @classmethod
    @abstractmethod
    def packb(cls, instance: Any) -> bytes:
        """
        Pack the instance into bytes
        """

    @classmethod
    @abstractmethod
    def unpackb(cls, data: bytes) -> Any:
        """
        Unpack the data back into an instance
        """


@register
class NumpyArrayHandler(AbstractHandler):
    """
    Arrays as (dtype string, shape, raw bytes). Bit exact, including
    the dtype byte order.
    """
    ext_type = 1
    obj_type = np.ndarray

    @classmethod
    def packb(cls, array: np.ndarray) -> bytes:
        array = np.ascontiguousarray(array)
        return msgpack.packb(
            (array.dtype.str, list(array.shape), array.tobytes()),
            use_bin_type=True)

    @classmethod
    def unpackb(cls, data: bytes) -> np.ndarray:
        dtype, shape, raw = msgpack.unpackb(data, raw=False)
        return np.frombuffer(raw, dtype=np.dtype(dtype)).reshape(
            shape).copy()


def scalar_handler(scalar_type, ext_type: int):
    """
    Handler class for one numpy scalar type, stored as its raw bytes
    """
    def packb(cls, value) -> bytes:
        return value.tobytes()

    def unpackb(cls, data: bytes):
        return np.frombuffer(data, dtype=scalar_type)[0]

    name = f"Numpy{scalar_type.__name__.capitalize()}Handler"
    return type(name, (AbstractHandler,), {
        'ext_type': ext_type, 'obj_type': scalar_type,
        'packb': classmethod(packb), 'unpackb': classmethod(unpackb)})


NumpyFloat32Handler = register(scalar_handler(np.float32, 3))
NumpyInt64Handler = register(scalar_handler(np.int64, 7))


class DataclassHandler:
    """
    Registered dataclasses as (class name, init fields). Arrays and
    other registered dataclasses inside them are handled recursively.
    """
    ext_type = 4

    @classmethod
    def packb(cls, obj) -> bytes:
        values = {f.name: getattr(obj, f.name)
                  for f in dataclasses.fields(obj) if f.init}
        return dumpb((type(obj).__name__, values), compress=False)

    @classmethod
    def unpackb(cls, data):
        name, values = loadb(data, decompress=False)
        klass = REGISTRY['dataclasses'].get(name)
        if klass is None:
            raise TypeError(f"dataclass {name} is not registered")
        return klass(**values)


def default(obj: Any):
    """
    Serialize (dumpb) hook for obj types that msgpack does not
    process out of the box.
    """
    handler = REGISTRY['obj_types'].get(type(obj))
    if handler is None:
        raise TypeError(f"Unknown type: {type(obj).__name__}")
    return msgpack.ExtType(handler.ext_type, handler.packb(obj))


def ext_hook(ext_type: int, bytes_data: bytes):
    """
    Deserialize (loadb) hook for registered ext_types
    """
    handler = REGISTRY['ext_types'].get(ext_type)
    if handler is None:
        raise TypeError(f"Unknown ext_type: {ext_type}")
    return handler.unpackb(bytes_data)


def dumpb(instance: Any, compress: bool = True) -> bytes:
    """
    Pack instance with msgpack, lz4 frame compressed unless told not to
    """
    packed = msgpack.packb(instance, default=default, use_bin_type=True)
    return lz4_compress(packed) if compress else packed


def loadb(packed: bytes, decompress: bool = True) -> Any:
    """
    Unpack bytes made by dumpb back to instances
    """
    if packed is None:
        return None
    if decompress:
        packed = lz4_decompress(packed)
    return msgpack.unpackb(
        packed, ext_hook=ext_hook, raw=False, strict_map_key=False,
        max_ext_len=MAX_EXT_LEN, max_str_len=MAX_STR_LEN)
