"""Deterministic mock generation service and embedding service.

The real image generator is an external model; this module implements the
same HTTP protocol so batches, gating, and validation passes run
hermetically:

* POST /generate  multipart {conditioning: PNG, prompt, seed[, checkpoint]}
  -> PNG. Mode "echo" returns the conditioning unchanged; mode "noise"
  overlays seed-keyed uniform noise so outputs differ per seed but replay
  identically.
* POST /embed     raw PNG body -> {"dim": d, "values": [...]} using the
  built-in descriptor.

Run standalone:  python3 -m genaug.genservice --mode echo --port 8600
"""

from __future__ import annotations

import threading
import time

import numpy as np
from fastapi import FastAPI, Form, Request, Response, UploadFile

from genaug.iqa import BuiltinDescriptor
from genaug.raster import png_bytes, png_to_array


def make_generation_app(mode: str = "echo", noise_amplitude: int = 24) -> FastAPI:
    if mode not in ("echo", "noise"):
        raise ValueError(f"unknown mock mode {mode!r} (use 'echo' or 'noise')")
    app = FastAPI(title="mock generation service")

    @app.post("/generate")
    async def generate(conditioning: UploadFile, prompt: str = Form(...),
                       seed: int = Form(0), checkpoint: str = Form("")) -> Response:
        img = png_to_array(await conditioning.read())
        if mode == "noise":
            rng = np.random.RandomState(seed & 0x7FFFFFFF)
            noise = rng.randint(-noise_amplitude, noise_amplitude + 1,
                                size=img.shape, dtype=np.int32)
            img = np.clip(img.astype(np.int32) + noise, 0, 255).astype(np.uint8)
        return Response(content=png_bytes(img), media_type="image/png")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"mode": mode}

    return app


def make_embedding_app() -> FastAPI:
    app = FastAPI(title="embedding service")
    provider = BuiltinDescriptor()

    @app.post("/embed")
    async def embed(request: Request) -> dict:
        img = png_to_array(await request.body())
        vec = provider.embed(img)
        return {"dim": int(vec.shape[0]), "values": [float(v) for v in vec]}

    return app


class ServiceThread:
    """Run an ASGI app on a background uvicorn server (port 0 = ephemeral)."""

    def __init__(self, app: FastAPI, host: str = "127.0.0.1", port: int = 0):
        import uvicorn

        self._config = uvicorn.Config(app, host=host, port=port, log_level="warning")
        self._server = uvicorn.Server(self._config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def __enter__(self) -> "ServiceThread":
        self._thread.start()
        deadline = time.monotonic() + 10.0
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("mock service failed to start")
            time.sleep(0.01)
        return self

    @property
    def base_url(self) -> str:
        servers = self._server.servers
        sock = servers[0].sockets[0]
        host, port = sock.getsockname()[:2]
        return f"http://{host}:{port}"

    def __exit__(self, *exc_info) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=10.0)


def main() -> None:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="mock generation/embedding service")
    parser.add_argument("--mode", default="echo", choices=["echo", "noise"])
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8600)
    parser.add_argument("--embedding", action="store_true",
                        help="serve the embedding protocol instead")
    args = parser.parse_args()
    app = make_embedding_app() if args.embedding else make_generation_app(args.mode)
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":
    main()
