"""Process wiring: uvicorn servers on loopback threads, background pumps.

ServiceStack boots the whole pipeline in one process: the core app (queue,
store, control plane, ingester, alerting, incidents) on one port and the
gateway on another. Tests and the fleet simulator use it for real HTTP
over loopback; ``miniops serve`` runs the same stack in the foreground.
"""

from __future__ import annotations

import socket
import threading
import time
from pathlib import Path
from typing import Optional

import uvicorn

from .gateway import ApiConfig, build_gateway_app
from .server import CoreServices, build_core_app


class HttpServer:
    """One uvicorn server on a background thread, bound to a loopback port."""

    def __init__(self, app, host: str = "127.0.0.1", port: int = 0):
        self.config = uvicorn.Config(app, host=host, port=port, log_level="warning",
                                     access_log=False)
        self.server = uvicorn.Server(self.config)
        self.thread: Optional[threading.Thread] = None
        self.host = host
        self.port = port

    def start(self, timeout_s: float = 10.0) -> str:
        self.thread = threading.Thread(target=self.server.run, daemon=True)
        self.thread.start()
        deadline = time.monotonic() + timeout_s
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("uvicorn server failed to start in time")
            time.sleep(0.01)
        sock: socket.socket = self.server.servers[0].sockets[0]
        self.port = sock.getsockname()[1]
        return self.url

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def stop(self) -> None:
        self.server.should_exit = True
        if self.thread is not None:
            self.thread.join(timeout=10)


class BackgroundLoop(threading.Thread):
    def __init__(self, fn, interval_s: float, name: str):
        super().__init__(daemon=True, name=name)
        self.fn = fn
        self.interval_s = interval_s
        self._halt = threading.Event()

    def run(self) -> None:
        while not self._halt.is_set():
            try:
                self.fn()
            except Exception:  # keep the loop alive; errors are logged upstream
                pass
            self._halt.wait(self.interval_s)

    def stop(self) -> None:
        self._halt.set()
        self.join(timeout=10)


class ServiceStack:
    """The full pipeline on loopback HTTP, one call to start and stop."""

    def __init__(self, data_dir: str | Path, token: str = "",
                 with_gateway: bool = True, pump_interval_s: float = 0.05,
                 maintenance_interval_s: Optional[float] = None,
                 static_dir: Optional[str] = None,
                 core_port: int = 0, gateway_port: int = 0):
        self.core = CoreServices.create(data_dir)
        self.token = token
        self._core_server = HttpServer(build_core_app(self.core), port=core_port)
        self._gateway_server: Optional[HttpServer] = None
        self._with_gateway = with_gateway
        self._static_dir = static_dir
        self._gateway_port = gateway_port
        self._loops: list[BackgroundLoop] = []
        self._pump_interval_s = pump_interval_s
        self._maintenance_interval_s = maintenance_interval_s
        self.core_url = ""
        self.gateway_url = ""

    def start(self) -> "ServiceStack":
        self.core_url = self._core_server.start()
        if self._with_gateway:
            config = ApiConfig.single_upstream(self.core_url, token=self.token,
                                               static_dir=self._static_dir,
                                               cors_origins=["*"] if self._static_dir else [])
            self._gateway_server = HttpServer(build_gateway_app(config),
                                              port=self._gateway_port)
            self.gateway_url = self._gateway_server.start()
        if self._pump_interval_s:
            pump = BackgroundLoop(self.core.pump_once, self._pump_interval_s, "store-pump")
            pump.start()
            self._loops.append(pump)
        if self._maintenance_interval_s:
            def tick():
                self.core.maintain()
                self.core.engine.evaluate_due(int(time.time() * 1000))
                if self.core.engine.dispatcher:
                    self.core.engine.dispatcher.retry_pending()
            maintenance = BackgroundLoop(tick, self._maintenance_interval_s, "maintenance")
            maintenance.start()
            self._loops.append(maintenance)
        return self

    def drain(self, timeout_s: float = 30.0) -> None:
        """Wait until the store consumer has caught up with every topic."""
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            stats = self.core.broker.stats()
            # a topic the consumer has not registered on yet is fully lagged
            lags = [topic_stats["head"] - topic_stats["groups"].get(self.core.consumer_group, 0)
                    for topic, topic_stats in stats.items()
                    if topic.startswith(self.core.consumer_prefixes)]
            if all(lag == 0 for lag in lags):
                return
            time.sleep(0.02)
        raise TimeoutError("store consumer did not catch up in time")

    def stop(self) -> None:
        for loop in self._loops:
            loop.stop()
        if self._gateway_server is not None:
            self._gateway_server.stop()
        self._core_server.stop()
        self.core.close()

    def __enter__(self) -> "ServiceStack":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
