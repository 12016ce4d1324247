import math
import pathlib
import sys
import typing

import yaml


class DataClass:
    def serialize(self):
        return serialize(self)


def serialize(instance: typing.Union[DataClass, typing.Dict[str, typing.Any]]):
    if isinstance(instance, DataClass):
        attributes = {key: getattr(instance, key) for key in dir(instance)
                      if not key.startswith('_') and not key.endswith('_')}
        return serialize({key: value for key, value in attributes.items() if not isinstance(value, typing.Callable)})
    return {k: serialize(v) if isinstance(v, DataClass) else v for k, v in instance.items()}


class Log(DataClass):
    verbose: bool = False  # progress lines per plan entry
    human_digits: int = 6
    structured_digits: int = 17


class Numerics(DataClass):
    rank_tolerance: float = 1e-9  # relative to the largest singular value
    resolution_tolerance: float = 1e-8  # 1 - diag(row-space projector) below this -> resolved
    hermitian_tolerance: float = 1e-12
    psd_tolerance: float = 1e-10


class ToyNoise(DataClass):
    delta: float = 0.7
    a: float = 0.03  # a + c - f = 0 keeps E_A trace preserving
    b: float = 0.
    c: float = 0.01
    d: float = 0.
    e: float = 0.
    f: float = 0.04

    def parameters(self) -> typing.Dict[str, float]:
        return {name: getattr(self, name) for name in ("delta", "a", "b", "c", "d", "e", "f")}


class Protocol(DataClass):
    codes: typing.List[str] = ["C1", "C2", "C3"]
    theta: float = math.pi / 8  # fourth input of the k=1 schedule
    seed: int = 0


class Output(DataClass):
    format: str = "human"  # human | structured
    path: typing.Optional[str] = None  # None -> stdout


def init_class(instance: DataClass, config: typing.Dict[str, typing.Any]):
    for name in dir(instance):
        if name.startswith("_") or name.endswith("_") or name not in config:
            continue
        attr = getattr(instance, name)
        if isinstance(attr, DataClass):
            init_class(attr, config[name])
            continue
        setattr(instance, name, config[name])


class Context(DataClass):
    def __init__(self, config: typing.Optional[typing.Dict[str, typing.Any]] = None,
                 path: typing.Optional[typing.Union[str, pathlib.Path]] = None):
        self.log = Log()
        self.numerics = Numerics()
        self.toy_noise = ToyNoise()
        self.protocol = Protocol()
        self.output = Output()

        if path is None and len(sys.argv) > 1 and sys.argv[1].endswith('.yaml'):
            path = sys.argv[1]
        if path is not None:
            with open(path) as f:
                cfg = f.read()
            init_class(self, yaml.safe_load(cfg) or {})

        if config is not None:
            init_class(self, config)
