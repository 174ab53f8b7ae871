"""FastAPI service wrapping the training/evaluation pipeline.

All endpoints are synchronous and operate on file paths visible to the
server process; training requests block until the run finishes.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..autodiff import AutodiffError
from ..formats import FormatError
from ..graph import GraphError
from ..ntu import SkeletonParseError
from ..training import TrainConfig, TrainingDiverged
from .. import pipeline
from . import schemas as s

_CLIENT_ERRORS = (FormatError, SkeletonParseError, GraphError, AutodiffError,
                  ValueError, FileNotFoundError, KeyError)


def create_app() -> FastAPI:
    app = FastAPI(title="sttr", version=__version__,
                  description="Spatial-temporal transformer engine for "
                              "skeleton-based action recognition")

    @app.exception_handler(Exception)
    async def handle_errors(request: Request, exc: Exception):
        if isinstance(exc, _CLIENT_ERRORS):
            status, kind = 422, type(exc).__name__
        elif isinstance(exc, TrainingDiverged):
            status, kind = 500, "TrainingDiverged"
        else:
            status, kind = 500, type(exc).__name__
        return JSONResponse(status_code=status,
                            content={"error": kind, "detail": str(exc)})

    @app.get("/health", response_model=s.HealthResponse)
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/synth", response_model=s.SynthResponse)
    def synth(req: s.SynthRequest):
        return pipeline.run_synth(req.out_path, req.seed, req.num_classes,
                                  req.clips_per_class, req.frames, req.joints,
                                  req.noise)

    @app.post("/parse-ntu", response_model=s.ParseNtuResponse)
    def parse_ntu(req: s.ParseNtuRequest):
        return pipeline.run_parse_ntu(req.input_dir, req.out_path,
                                      req.target_frames, req.max_bodies)

    @app.post("/train", response_model=s.TrainResponse)
    def train(req: s.TrainRequest):
        tc = TrainConfig(epochs=req.epochs, batch_size=req.batch_size,
                         base_lr=req.base_lr,
                         lr_drop_epochs=tuple(req.lr_drop_epochs),
                         lr_drop_factor=req.lr_drop_factor,
                         momentum=req.momentum, weight_decay=req.weight_decay,
                         seed=req.seed, drop_rate=req.drop_rate)
        return pipeline.run_train(req.data_path, req.stream, req.run_dir,
                                  bones=req.bones, plan=req.plan, heads=req.heads,
                                  train_config=tc, deterministic=req.deterministic,
                                  test_fraction=req.test_fraction,
                                  drop_rate=req.drop_rate)

    @app.post("/eval", response_model=s.EvalResponse)
    def eval_(req: s.EvalRequest):
        return pipeline.run_eval(req.checkpoint, req.data_path, req.scores_out,
                                 req.batch_size)

    @app.post("/fuse", response_model=s.FuseResponse)
    def fuse(req: s.FuseRequest):
        return pipeline.run_fuse(req.a_path, req.b_path, req.out_path)

    @app.post("/params", response_model=s.ParamsResponse)
    def params(req: s.ParamsRequest):
        return pipeline.run_params(req.channels, req.joints, req.partitions,
                                   req.kernel_t, req.heads, req.stream,
                                   req.plan, req.bones, req.num_classes)

    @app.post("/gradcheck", response_model=s.GradcheckResponse)
    def gradcheck(req: s.GradcheckRequest):
        return pipeline.run_gradcheck(req.seeds, req.tolerance,
                                      req.include_streams)

    return app


app = create_app()
