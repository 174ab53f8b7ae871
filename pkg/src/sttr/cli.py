"""Command-line client for the sttr service.

Every subcommand serializes its flags into a request against the HTTP API.
By default the app is mounted in-process (no server needed); point
`--server` or the STTR_SERVER environment variable at a running instance
to go over the network. Relative run/output paths resolve against
STTR_RUN_ROOT when it is set.
"""

from __future__ import annotations

import asyncio
import json
import os
import sys
from pathlib import Path

import click
import httpx


def _resolve(path: str) -> str:
    root = os.environ.get("STTR_RUN_ROOT")
    if root and not os.path.isabs(path):
        return str(Path(root) / path)
    return path


def _call(server: str | None, path: str, payload: dict) -> dict:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            response = client.post(path, json=payload)
    else:
        from .service import create_app

        async def go():
            transport = httpx.ASGITransport(app=create_app(),
                                            raise_app_exceptions=False)
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://sttr",
                                         timeout=None) as client:
                return await client.post(path, json=payload)

        response = asyncio.run(go())
    body = response.json()
    if response.status_code != 200:
        kind = body.get("error", f"http-{response.status_code}")
        detail = body.get("detail", json.dumps(body))
        click.echo(f"error: {kind}: {detail}", err=True)
        sys.exit(1)
    return body


def _merge_config(config_path: str | None, ctx: click.Context, payload: dict) -> dict:
    """Config-file keys fill in values the command line left at defaults."""
    if not config_path:
        return payload
    with open(config_path) as fh:
        base = json.load(fh)
    unknown = set(base) - set(payload)
    if unknown:
        raise click.UsageError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(payload)
    for key, value in base.items():
        source = ctx.get_parameter_source(key.replace("-", "_"))
        if source is None or source.name != "COMMANDLINE":
            merged[key] = value
    return merged


def _write_resolved(payload: dict, anchor: str) -> None:
    with open(f"{anchor}.config.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


@click.group()
@click.option("--server", envvar="STTR_SERVER", default=None,
              help="Base URL of a running service; default runs in-process.")
@click.pass_context
def main(ctx, server):
    """Spatial-temporal transformer engine for skeleton action recognition."""
    ctx.obj = server


@main.command()
@click.option("--out", "out_path", required=True, help="Packed clip output file.")
@click.option("--seed", default=0, show_default=True)
@click.option("--classes", "num_classes", default=4, show_default=True)
@click.option("--clips-per-class", default=50, show_default=True)
@click.option("--frames", default=32, show_default=True)
@click.option("--joints", default=25, show_default=True)
@click.option("--noise", default=0.02, show_default=True)
@click.option("--config", "config_path", default=None, help="JSON config file.")
@click.pass_context
def synth(ctx, out_path, seed, num_classes, clips_per_class, frames, joints,
          noise, config_path):
    """Generate a synthetic skeleton dataset."""
    payload = {"out_path": _resolve(out_path), "seed": seed,
               "num_classes": num_classes, "clips_per_class": clips_per_class,
               "frames": frames, "joints": joints, "noise": noise}
    payload = _merge_config(config_path, ctx, payload)
    result = _call(ctx.obj, "/synth", payload)
    _write_resolved(payload, result["path"])
    click.echo(json.dumps(result, indent=2))


@main.command("parse-ntu")
@click.option("--input-dir", required=True, help="Directory of .skeleton files.")
@click.option("--out", "out_path", required=True, help="Packed clip output file.")
@click.option("--frames", "target_frames", default=300, show_default=True)
@click.option("--max-bodies", default=2, show_default=True)
@click.option("--config", "config_path", default=None)
@click.pass_context
def parse_ntu(ctx, input_dir, out_path, target_frames, max_bodies, config_path):
    """Ingest NTU .skeleton files into the packed clip format."""
    payload = {"input_dir": input_dir, "out_path": _resolve(out_path),
               "target_frames": target_frames, "max_bodies": max_bodies}
    payload = _merge_config(config_path, ctx, payload)
    result = _call(ctx.obj, "/parse-ntu", payload)
    _write_resolved(payload, result["path"])
    click.echo(json.dumps(result, indent=2))


@main.command()
@click.option("--data", "data_path", required=True, help="Packed clip file.")
@click.option("--stream", type=click.Choice(["s-tr", "t-tr"]), required=True)
@click.option("--run-dir", required=True)
@click.option("--bones/--no-bones", default=False, show_default=True)
@click.option("--plan", type=click.Choice(["desk", "full"]), default="desk",
              show_default=True)
@click.option("--heads", default=None, type=int,
              help="Attention heads; defaults to 2 (desk) or 8 (full).")
@click.option("--epochs", default=50, show_default=True)
@click.option("--batch-size", default=32, show_default=True)
@click.option("--lr", "base_lr", default=0.02, show_default=True)
@click.option("--lr-drops", "lr_drop_epochs", default="30,42", show_default=True,
              help="Comma-separated epochs where the rate divides by the factor.")
@click.option("--lr-drop-factor", default=10.0, show_default=True)
@click.option("--momentum", default=0.9, show_default=True)
@click.option("--weight-decay", default=1e-4, show_default=True)
@click.option("--drop-rate", default=0.1, show_default=True,
              help="DropAttention rate on softmaxed scores.")
@click.option("--seed", default=0, show_default=True)
@click.option("--deterministic", is_flag=True, default=False)
@click.option("--test-fraction", default=0.2, show_default=True)
@click.option("--config", "config_path", default=None)
@click.pass_context
def train(ctx, data_path, stream, run_dir, bones, plan, heads, epochs,
          batch_size, base_lr, lr_drop_epochs, lr_drop_factor, momentum,
          weight_decay, drop_rate, seed, deterministic, test_fraction,
          config_path):
    """Train one stream and write metrics, scores, and a checkpoint."""
    try:
        drops = [int(e) for e in str(lr_drop_epochs).split(",") if e != ""]
    except ValueError:
        raise click.UsageError(f"bad --lr-drops value: {lr_drop_epochs!r}")
    payload = {"data_path": _resolve(data_path), "stream": stream,
               "run_dir": _resolve(run_dir), "bones": bones, "plan": plan,
               "heads": heads, "epochs": epochs, "batch_size": batch_size,
               "base_lr": base_lr, "lr_drop_epochs": drops,
               "lr_drop_factor": lr_drop_factor, "momentum": momentum,
               "weight_decay": weight_decay, "drop_rate": drop_rate,
               "seed": seed, "deterministic": deterministic,
               "test_fraction": test_fraction}
    payload = _merge_config(config_path, ctx, payload)
    result = _call(ctx.obj, "/train", payload)
    click.echo(json.dumps(result, indent=2))


@main.command("eval")
@click.option("--checkpoint", required=True)
@click.option("--data", "data_path", required=True)
@click.option("--out", "scores_out", required=True, help="ScoreTable output file.")
@click.option("--batch-size", default=32, show_default=True)
@click.option("--config", "config_path", default=None)
@click.pass_context
def eval_cmd(ctx, checkpoint, data_path, scores_out, batch_size, config_path):
    """Evaluate a checkpoint and emit a ScoreTable."""
    payload = {"checkpoint": _resolve(checkpoint), "data_path": _resolve(data_path),
               "scores_out": _resolve(scores_out), "batch_size": batch_size}
    payload = _merge_config(config_path, ctx, payload)
    result = _call(ctx.obj, "/eval", payload)
    _write_resolved(payload, result["scores"])
    click.echo(json.dumps(result, indent=2))


@main.command()
@click.argument("a_path")
@click.argument("b_path")
@click.option("--out", "out_path", required=True, help="Fused ScoreTable file.")
@click.pass_context
def fuse(ctx, a_path, b_path, out_path):
    """Fuse two streams' ScoreTables by summing probabilities."""
    payload = {"a_path": _resolve(a_path), "b_path": _resolve(b_path),
               "out_path": _resolve(out_path)}
    result = _call(ctx.obj, "/fuse", payload)
    _write_resolved(payload, result["fused"])
    click.echo(json.dumps(result, indent=2))


@main.command()
@click.option("--channels", default=256, show_default=True)
@click.option("--joints", default=25, show_default=True)
@click.option("--partitions", default=3, show_default=True)
@click.option("--kernel-t", default=9, show_default=True)
@click.option("--heads", default=8, show_default=True)
@click.option("--stream", type=click.Choice(["s-tr", "t-tr"]), default=None,
              help="Also itemize a full network of this stream.")
@click.option("--plan", type=click.Choice(["desk", "full"]), default="full",
              show_default=True)
@click.option("--bones", is_flag=True, default=False)
@click.pass_context
def params(ctx, channels, joints, partitions, kernel_t, heads, stream, plan, bones):
    """Print itemized parameter counts per module."""
    payload = {"channels": channels, "joints": joints, "partitions": partitions,
               "kernel_t": kernel_t, "heads": heads, "stream": stream,
               "plan": plan, "bones": bones, "num_classes": 60}
    result = _call(ctx.obj, "/params", payload)
    click.echo(f"unit parameter counts at C_in=C_out={result['channels']}:")
    for unit, items in result["units"].items():
        for item, count in items.items():
            click.echo(f"  {unit}.{item} = {count}")
    if result.get("network"):
        net = result["network"]
        click.echo(f"network ({net['stream']}) total = {net['total']}")
        for layer in net["per_layer"]:
            click.echo(
                f"  layer {layer['layer']}: spatial={layer['spatial']} "
                f"temporal={layer['temporal']} bn={layer['bn_in']} "
                f"skip={layer['skip']} total={layer['total']}")
        click.echo(f"  classifier = {net['classifier']}")


@main.command()
@click.option("--seeds", default=10, show_default=True)
@click.option("--tolerance", default=1e-5, show_default=True)
@click.option("--skip-streams", is_flag=True, default=False,
              help="Only check individual operations.")
@click.pass_context
def gradcheck(ctx, seeds, tolerance, skip_streams):
    """Run the finite-difference gradient suite."""
    payload = {"seeds": seeds, "tolerance": tolerance,
               "include_streams": not skip_streams}
    result = _call(ctx.obj, "/gradcheck", payload)
    for case in result["cases"]:
        status = "pass" if case["passed"] else "FAIL"
        click.echo(f"{status} {case['op']} seed={case['seed']} "
                   f"rel_error={case['max_rel_error']:.3e}")
    click.echo(f"max_rel_error={result['max_rel_error']:.3e} "
               f"tolerance={result['tolerance']:.0e}")
    if not result["passed"]:
        click.echo("error: gradcheck: tolerance exceeded", err=True)
        sys.exit(1)
    click.echo("all gradient checks passed")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
