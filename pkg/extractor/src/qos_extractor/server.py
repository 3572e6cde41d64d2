"""HTTP service exposing one loaded model at POST /v1/embed.

Wire protocol: request JSON {"model": str, "pooling": "first"|"last",
"texts": [str, ...]}, response JSON {"dim": int, "vectors": [[...], ...]}.
Status codes: 400 malformed request or model/pooling mismatch, 422 prompt
over the model context, 500 inference failure. The service is stateless;
model access is serialized behind a lock.
"""

import threading

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import InferenceError, PoolingError, PromptTooLongError
from .extract import embed_texts
from .models import LoadedModel


class EmbedRequest(BaseModel):
    model: str
    pooling: str
    texts: list[str]


def make_app(loaded: LoadedModel) -> FastAPI:
    app = FastAPI(title="qos-extractor", docs_url=None, redoc_url=None)
    lock = threading.Lock()

    # framework validation replies 422 by default; keep that code reserved
    # for over-length prompts and call malformed bodies what they are
    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.post("/v1/embed")
    def embed(req: EmbedRequest) -> JSONResponse:
        if not req.texts:
            return JSONResponse(status_code=400, content={"detail": "texts is empty"})
        if not loaded.accepts_name(req.model):
            return JSONResponse(
                status_code=400,
                content={
                    "detail": f"model {req.model!r} is not loaded here "
                    f"(serving {loaded.requested_name!r})"
                },
            )
        try:
            # sync endpoints run on a threadpool; serialize model access
            with lock:
                matrix = embed_texts(loaded, req.texts, req.pooling)
        except PoolingError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        except PromptTooLongError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        except InferenceError as exc:
            return JSONResponse(status_code=500, content={"detail": str(exc)})
        return JSONResponse(
            status_code=200,
            content={
                "dim": loaded.hidden_size,
                "vectors": [[float(x) for x in row] for row in matrix],
            },
        )

    @app.get("/healthz")
    def healthz() -> dict:
        return {
            "model": loaded.requested_name,
            "kind": loaded.kind,
            "dim": loaded.hidden_size,
        }

    return app
