"""Command-line client for the pipeline service.

Runs the service in-process by default; `--server URL` targets a remote
instance instead.  Exit codes: 0 success, 2 validation problem (bad config,
corrupt corpus, broken checkpoint chain), 3 training divergence, 1 anything
else.
"""

from __future__ import annotations

import asyncio
import json
import sys

import click
import httpx

from .pipeline import RunConfig
from .samplers import VARIANTS

EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3


def _post(server: str | None, path: str, payload: dict) -> dict:
    if server:
        try:
            with httpx.Client(base_url=server, timeout=None) as client:
                resp = client.post(path, json=payload)
        except httpx.HTTPError as e:
            click.echo(f"error: cannot reach {server}: {e}", err=True)
            raise SystemExit(1)
    else:
        from .service import create_app

        async def _call():
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://pipeline",
                                         timeout=None) as client:
                return await client.post(path, json=payload)

        resp = asyncio.run(_call())
    if resp.status_code == 200:
        return resp.json()
    try:
        body = resp.json()
    except ValueError:
        body = {"message": resp.text}
    message = body.get("message") or body.get("detail") or resp.text
    click.echo(f"error: {message}", err=True)
    if body.get("error_type") == "divergence":
        raise SystemExit(EXIT_DIVERGENCE)
    if body.get("error_type") == "validation" or resp.status_code == 422:
        raise SystemExit(EXIT_VALIDATION)
    raise SystemExit(1)


def _echo(result: dict):
    click.echo(json.dumps(result, indent=2, sort_keys=True))


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON run-config file (training commands).")
@click.option("--seed", type=int, default=None, help="Override the seed.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Override the output directory (or file for infer).")
@click.option("--server", default=None,
              help="Service URL; omit to run in-process.")
@click.pass_context
def main(ctx, config_path, seed, out_dir, server):
    """Two-stage prosody trainer: corpus synthesis, training, inference, eval."""
    ctx.obj = {"config_path": config_path, "seed": seed, "out": out_dir,
               "server": server}


def _run_config(ctx) -> dict:
    """Config file -> payload dict with --seed/--out applied on top."""
    path = ctx.obj["config_path"]
    if path is None:
        click.echo("error: this command needs --config", err=True)
        raise SystemExit(EXIT_VALIDATION)
    try:
        config = RunConfig.from_file(path)
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        raise SystemExit(EXIT_VALIDATION)
    d = config.to_dict()
    if ctx.obj["seed"] is not None:
        d["seed"] = ctx.obj["seed"]
    if ctx.obj["out"] is not None:
        d["out_dir"] = ctx.obj["out"]
    return d


def _require_out(ctx, what="directory") -> str:
    out = ctx.obj["out"]
    if out is None:
        click.echo(f"error: this command needs --out (output {what})", err=True)
        raise SystemExit(EXIT_VALIDATION)
    return out


@main.command("synth-corpus")
@click.option("--size", type=int, default=200, show_default=True,
              help="Number of sentences.")
@click.pass_context
def synth_corpus_cmd(ctx, size):
    """Generate a synthetic corpus with a planted prosody signal."""
    out = _require_out(ctx)
    seed = ctx.obj["seed"] if ctx.obj["seed"] is not None else 0
    _echo(_post(ctx.obj["server"], "/synth-corpus",
                {"out_dir": out, "size": size, "seed": seed}))


@main.command("train-stage1")
@click.pass_context
def train_stage1_cmd(ctx):
    """Train the mel autoencoder with the variational reference encoder."""
    _echo(_post(ctx.obj["server"], "/train/stage1", {"config": _run_config(ctx)}))


@main.command("train-sampler")
@click.option("--stage1", "stage1_dir", required=True, type=click.Path(),
              help="Stage-1 checkpoint directory.")
@click.option("--variant", type=click.Choice(VARIANTS), default=None,
              help="Sampler variant; defaults to the config's.")
@click.pass_context
def train_sampler_cmd(ctx, stage1_dir, variant):
    """Train a text sampler against frozen reference-encoder posteriors."""
    _echo(_post(ctx.obj["server"], "/train/sampler",
                {"config": _run_config(ctx), "stage1_dir": stage1_dir,
                 "variant": variant}))


@main.command("train-duration")
@click.option("--sampler", "sampler_dir", required=True, type=click.Path(),
              help="Sampler checkpoint directory.")
@click.pass_context
def train_duration_cmd(ctx, sampler_dir):
    """Train the duration model, optionally conditioned on sampled prosody."""
    _echo(_post(ctx.obj["server"], "/train/duration",
                {"config": _run_config(ctx), "sampler_dir": sampler_dir}))


@main.command("infer")
@click.option("--stage1", "stage1_dir", required=True, type=click.Path())
@click.option("--sampler", "sampler_dir", required=True, type=click.Path())
@click.option("--duration", "duration_dir", required=True, type=click.Path())
@click.option("--corpus", "corpus_dir", required=True, type=click.Path())
@click.option("--utt-id", required=True, help="Utterance to synthesize.")
@click.option("--temperature", type=float, default=0.0, show_default=True,
              help="Scale on the predicted std before sampling z.")
@click.option("--use-oracle-z", is_flag=True,
              help="Take z from the reference encoder on the real mel.")
@click.pass_context
def infer_cmd(ctx, stage1_dir, sampler_dir, duration_dir, corpus_dir, utt_id,
              temperature, use_oracle_z):
    """Predict prosody and durations from text, then decode a mel."""
    out = _require_out(ctx, what="KTNS path")
    seed = ctx.obj["seed"] if ctx.obj["seed"] is not None else 0
    _echo(_post(ctx.obj["server"], "/infer",
                {"stage1_dir": stage1_dir, "sampler_dir": sampler_dir,
                 "duration_dir": duration_dir, "corpus_dir": corpus_dir,
                 "utt_id": utt_id, "out_path": out, "temperature": temperature,
                 "use_oracle_z": use_oracle_z, "seed": seed}))


@main.command("eval")
@click.option("--stage1", "stage1_dir", required=True, type=click.Path())
@click.option("--sampler", "sampler_dir", required=True, type=click.Path())
@click.option("--duration", "duration_dir", required=True, type=click.Path())
@click.option("--corpus", "corpus_dir", required=True, type=click.Path())
@click.pass_context
def eval_cmd(ctx, stage1_dir, sampler_dir, duration_dir, corpus_dir):
    """Held-out metrics under prior / sampler / oracle latent conditions."""
    out = _require_out(ctx)
    _echo(_post(ctx.obj["server"], "/eval",
                {"stage1_dir": stage1_dir, "sampler_dir": sampler_dir,
                 "duration_dir": duration_dir, "corpus_dir": corpus_dir,
                 "out_dir": out}))


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve_cmd(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("prosynth.service.app:app", host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
