from .base import HardLabelOracle, QueryLedger
from .builtin import ConvOracle, LinearOracle, make_builtin
from .remote import OracleServer, RemoteOracle, serve


def open_oracle(spec, input_shape, budget=None):
    """Build an oracle from a URL or a builtin spec such as ``conv:seed=0,classes=10``."""
    if spec.startswith(("http://", "https://")):
        return RemoteOracle(spec, input_shape, budget)
    kind, _, params = spec.partition(":")
    opts = dict(p.split("=", 1) for p in params.split(",") if p)
    return make_builtin(kind, input_shape, seed=int(opts.get("seed", 0)),
                        num_classes=int(opts.get("classes", 10)), budget=budget,
                        bias=float(opts.get("bias", 0.0)))


__all__ = ["HardLabelOracle", "QueryLedger", "LinearOracle", "ConvOracle", "RemoteOracle",
           "OracleServer", "serve", "make_builtin", "open_oracle"]
