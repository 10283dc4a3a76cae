"""HTTP face of the pipeline.

Every CLI subcommand maps to one POST endpoint; the CLI talks to this app
in-process by default.  Error contract: anything input-shaped (bad config,
corrupt corpus, broken checkpoint lineage) returns 422 with
error_type "validation"; a non-finite training loss returns 500 with
error_type "divergence".  The CLI turns those into exit codes 2 and 3.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..corpus import synth_corpus
from ..diffcore import KTNSError, TrainingDivergenceError
from ..pipeline import run_eval, run_inference, train_duration, train_sampler, train_stage1
from . import schemas


def _error(status: int, error_type: str, exc: Exception) -> JSONResponse:
    body = schemas.ErrorBody(error_type=error_type, message=str(exc))
    return JSONResponse(status_code=status, content=body.model_dump())


def create_app() -> FastAPI:
    app = FastAPI(title="prosynth", description="two-stage prosody TTS trainer")

    @app.exception_handler(RequestValidationError)
    async def _body_handler(request: Request, exc: RequestValidationError):
        parts = ["%s: %s" % (".".join(str(p) for p in e["loc"]), e["msg"])
                 for e in exc.errors()]
        body = schemas.ErrorBody(error_type="validation", message="; ".join(parts))
        return JSONResponse(status_code=422, content=body.model_dump())

    @app.exception_handler(ValueError)
    async def _validation_handler(request: Request, exc: ValueError):
        return _error(422, "validation", exc)

    @app.exception_handler(KTNSError)
    async def _ktns_handler(request: Request, exc: KTNSError):
        return _error(422, "validation", exc)

    @app.exception_handler(TrainingDivergenceError)
    async def _divergence_handler(request: Request, exc: TrainingDivergenceError):
        return _error(500, "divergence", exc)

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/synth-corpus", response_model=schemas.SynthCorpusResponse)
    def synth(req: schemas.SynthCorpusRequest):
        config = synth_corpus(req.out_dir, req.size, req.seed)
        return schemas.SynthCorpusResponse(
            out_dir=req.out_dir, size=req.size, seed=req.seed,
            mel_bins=config.mel_bins, embedding_dim=config.embedding_dim)

    @app.post("/train/stage1", response_model=schemas.TrainStage1Response)
    def stage1(req: schemas.TrainStage1Request):
        return train_stage1(req.config.to_run_config())

    @app.post("/train/sampler", response_model=schemas.TrainSamplerResponse)
    def sampler(req: schemas.TrainSamplerRequest):
        return train_sampler(req.config.to_run_config(), req.stage1_dir, req.variant)

    @app.post("/train/duration", response_model=schemas.TrainDurationResponse)
    def duration(req: schemas.TrainDurationRequest):
        return train_duration(req.config.to_run_config(), req.sampler_dir)

    @app.post("/infer", response_model=schemas.InferResponse)
    def infer(req: schemas.InferRequest):
        return run_inference(
            req.stage1_dir, req.sampler_dir, req.duration_dir, req.corpus_dir,
            req.utt_id, req.out_path, temperature=req.temperature,
            use_oracle_z=req.use_oracle_z, seed=req.seed)

    @app.post("/eval", response_model=schemas.EvalResponse)
    def evaluate(req: schemas.EvalRequest):
        return run_eval(req.stage1_dir, req.sampler_dir, req.duration_dir,
                        req.corpus_dir, req.out_dir)

    return app


app = create_app()
