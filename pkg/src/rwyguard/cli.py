"""Command-line entry points.

    rwyguard doe run --spec spec.json --out results/
    rwyguard doe bench --frames 2000
    rwyguard sim run --scenario scenario.json [--udp host:port] [--time-scale 4]
    rwyguard gateway serve --tcp-port 9630 --udp-port 49005 [--http-port 8080]

`doe run` exits nonzero when the spec file's thresholds are violated, so it
can gate CI.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .simulator import emit_datagrams, run_scenario, scenario_from_json
from .telemetry import ChannelMapping


def _cmd_doe_run(args) -> int:
    spec = harness.DoeSpec.from_json(args.spec)
    print(f"{spec.procedure} DOE: {spec.num_points} points, "
          f"{len(spec.dimensions)} dimensions, noise x{spec.noise_scale}")

    def progress(done, total):
        if done % 20 == 0 or done == total:
            print(f"  {done}/{total} runs", flush=True)

    report = harness.run_doe(spec, progress=progress)
    summary = harness.write_report(report, args.out)
    agg = summary["aggregates"]
    print(f"wrote {args.out}/runs.csv, summary.json, figures")
    if agg["deviation_mean"] is not None:
        print(f"deviation: mean {agg['deviation_mean'] * 100:+.3f}%  "
              f"std {agg['deviation_std'] * 100:.3f}%  "
              f"conservative {agg['conservative_fraction'] * 100:.1f}%")
    for key in ("convergence_accel_median_s", "convergence_braking_median_s"):
        if key in agg:
            print(f"{key}: {agg[key]:.2f}")
    failures = summary["threshold_failures"]
    if failures:
        print("THRESHOLD FAILURES:", file=sys.stderr)
        for f in failures:
            print(f"  {f}", file=sys.stderr)
        return 1
    return 0


def _cmd_doe_bench(args) -> int:
    result = harness.latency_bench(n_frames=args.frames)
    for kind in ("acceleration", "braking"):
        s = result[kind]
        print(f"{kind:13s} mean {s['mean_ms']:.4f} ms  "
              f"std {s['std_ms']:.4f} ms  median {s['median_ms']:.4f} ms  "
              f"(n={s['n']})")
    if args.json:
        Path(args.json).write_text(json.dumps(result, indent=2) + "\n")
    return 0


def _cmd_sim_run(args) -> int:
    scenario = scenario_from_json(args.scenario)
    frames, truth = run_scenario(scenario)
    print(f"{scenario.kind}: {len(frames)} frames at {scenario.frame_rate:.0f} Hz")
    for name, value in vars(truth).items():
        if value is not None and value != {} and name != "kind":
            print(f"  {name}: {value}")
    if args.udp:
        host, _, port = args.udp.rpartition(":")
        mapping = (ChannelMapping.from_json(args.mapping) if args.mapping
                   else ChannelMapping())
        print(f"streaming to udp://{host}:{port} (time scale x{args.time_scale})")
        sent = emit_datagrams(frames, mapping, (host, int(port)),
                              frame_rate=scenario.frame_rate,
                              time_scale=args.time_scale)
        print(f"sent {sent} datagrams")
    if args.out:
        rows = [vars(f) for f in frames]
        Path(args.out).write_text(json.dumps(
            {"truth": {k: v for k, v in vars(truth).items()},
             "frames": rows}, indent=None, default=str) + "\n")
        print(f"wrote {args.out}")
    return 0


def _cmd_gateway_serve(args) -> int:
    import uvicorn

    from .gateway import GatewayServer
    from .httpapi import make_app

    mapping = (ChannelMapping.from_json(args.mapping) if args.mapping
               else ChannelMapping())
    gw = GatewayServer(tcp_port=args.tcp_port, udp_port=args.udp_port,
                       mapping=mapping, host=args.host).start()
    print(f"telemetry udp://{args.host}:{gw.udp_port}  "
          f"stream tcp://{args.host}:{gw.tcp_port}")
    try:
        if args.http_port:
            app = make_app(gw)
            print(f"http http://{args.host}:{args.http_port} "
                  f"(/health, /config, /stream)")
            uvicorn.run(app, host=args.host, port=args.http_port,
                        log_level="warning")
        else:
            import time
            while True:
                time.sleep(1.0)
    except KeyboardInterrupt:
        pass
    finally:
        gw.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rwyguard",
        description="Runway overrun prediction: experiments, simulation, gateway")
    sub = parser.add_subparsers(dest="command", required=True)

    doe = sub.add_parser("doe", help="experiment harness")
    doe_sub = doe.add_subparsers(dest="doe_command", required=True)
    run = doe_sub.add_parser("run", help="run a DOE sweep from a spec file")
    run.add_argument("--spec", required=True, help="DOE spec JSON")
    run.add_argument("--out", required=True, help="output directory")
    run.set_defaults(fn=_cmd_doe_run)
    bench = doe_sub.add_parser("bench", help="per-frame update latency")
    bench.add_argument("--frames", type=int, default=2000)
    bench.add_argument("--json", help="also write the result to this path")
    bench.set_defaults(fn=_cmd_doe_bench)

    sim = sub.add_parser("sim", help="flight simulator")
    sim_sub = sim.add_subparsers(dest="sim_command", required=True)
    sim_run = sim_sub.add_parser("run", help="run a scenario file")
    sim_run.add_argument("--scenario", required=True, help="scenario JSON")
    sim_run.add_argument("--udp", help="stream datagrams to host:port")
    sim_run.add_argument("--time-scale", type=float, default=1.0)
    sim_run.add_argument("--mapping", help="channel mapping JSON")
    sim_run.add_argument("--out", help="dump frames and ground truth to JSON")
    sim_run.set_defaults(fn=_cmd_sim_run)

    gw = sub.add_parser("gateway", help="session gateway")
    gw_sub = gw.add_subparsers(dest="gateway_command", required=True)
    serve = gw_sub.add_parser("serve", help="run the gateway daemon")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--tcp-port", type=int, default=9630)
    serve.add_argument("--udp-port", type=int, default=49005)
    serve.add_argument("--http-port", type=int, default=8080,
                       help="0 disables the HTTP adapter")
    serve.add_argument("--mapping", help="channel mapping JSON")
    serve.set_defaults(fn=_cmd_gateway_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
