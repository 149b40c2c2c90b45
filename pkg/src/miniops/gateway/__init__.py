"""REST facade over all subsystems, plus static console hosting."""

from .app import ApiConfig, build_gateway_app

__all__ = ["ApiConfig", "build_gateway_app"]
