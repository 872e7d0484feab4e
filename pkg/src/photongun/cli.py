"""Command-line front end: a thin client of the HTTP service.

By default requests are dispatched to the service in-process (no socket);
``--server``/``PHOTONGUN_SERVER`` points the same client at a remote
instance instead.  Exit codes: 0 success, 1 numerical failure or failed
validation, 2 configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2


class ServiceClient:
    """POSTs run configurations to the service, in-process or remote."""

    def __init__(self, server: str | None = None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            import warnings

            with warnings.catch_warnings():
                # starlette's sync ASGI bridge is the supported in-process
                # path; silence its import-time grumbling about httpx
                warnings.simplefilter("ignore")
                from starlette.testclient import TestClient

            from .service import app

            self._client = TestClient(app, raise_server_exceptions=False)

    def post(self, path: str, payload: dict) -> tuple[int, dict]:
        resp = self._client.post(path, json=payload)
        try:
            body = resp.json()
        except ValueError:
            body = {"detail": resp.text}
        return resp.status_code, body


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        _fail_config(f"cannot read config file {path}: {exc}")
    except json.JSONDecodeError as exc:
        _fail_config(f"config file {path} is not valid JSON: line {exc.lineno}: {exc.msg}")


def _fail_config(message: str):
    print(f"config error: {message}", file=sys.stderr)
    raise SystemExit(EXIT_CONFIG)


def _format_http_error(body: dict) -> str:
    detail = body.get("detail", body)
    if isinstance(detail, list):  # pydantic validation errors
        parts = []
        for err in detail:
            loc = ".".join(str(p) for p in err.get("loc", []) if p != "body")
            parts.append(f"{loc}: {err.get('msg', 'invalid')}")
        return "; ".join(parts)
    return str(detail)


def _write_out(path: str | None, text: str):
    data = text.encode("utf-8")
    if path:
        with open(path, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.write(text)


def _json_text(obj: dict) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _dispatch(mode: str, args: argparse.Namespace) -> int:
    payload = _load_config(args.config)
    payload["mode"] = mode
    if args.seed is not None:
        payload["seed"] = args.seed
    if getattr(args, "preset", None):
        payload["preset"] = args.preset
    if args.out is None and isinstance(payload.get("output"), str):
        args.out = payload["output"]

    server = args.server or os.environ.get("PHOTONGUN_SERVER") or None
    client = ServiceClient(server)
    status, body = client.post(f"/{mode}", payload)

    if status in (400, 422):
        _fail_config(_format_http_error(body))
    if status != 200:
        print(f"error: {_format_http_error(body)}", file=sys.stderr)
        return EXIT_NUMERICAL

    if mode == "sweep":
        _write_out(args.out, body["csv"])
        print(f"sweep: {body['rows']} rows", file=sys.stderr)
        return EXIT_OK

    if mode == "analyze":
        a, p = body["analytic"], body["propagator"]
        lines = [
            f"P_e   analytic {a['pe_exact']:.9g}   propagator {p['pe']:.9g}",
            f"Pi_0  analytic {a['pi_0']:.9g}   propagator {p['pi_0']:.9g}",
            f"Pi_1  analytic {a['pi_1']:.9g}   propagator {p['pi_1']:.9g}",
            f"f_il  analytic {a['f_il']:.9g}   propagator {p['f_il']:.9g}",
            f"f_il poisson baseline {a['f_il_poisson']:.9g}",
            f"shelving duty factor M {body['shelving']['duty_factor']:.9g}",
        ]
        steady = body["shelving"]["steady_metastable"]
        if steady is not None and steady > 1e-12:
            lines.append(f"steady shelved occupancy {steady:.9g}")
        for note in body.get("notes", []):
            lines.append(f"note: {note}")
        print("\n".join(lines))
        if args.out:
            _write_out(args.out, _json_text(body))
        return EXIT_OK

    if mode == "validate":
        for c in body["checks"]:
            mark = "PASS" if c["passed"] else "FAIL"
            print(f"[{mark}] {c['name']}: measured {c['measured']:.3e} tolerance {c['tolerance']:.3e}")
        n_pass = sum(c["passed"] for c in body["checks"])
        print(f"validate: {'PASS' if body['passed'] else 'FAIL'} ({n_pass}/{len(body['checks'])} checks)")
        if args.out:
            _write_out(args.out, _json_text(body))
        return EXIT_OK if body["passed"] else EXIT_NUMERICAL

    # mc / attack: JSON report
    text = _json_text(body)
    if args.out:
        _write_out(args.out, text)
        print(f"{mode}: report written to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="photongun",
        description="Photon statistics of a pulsed single-dipole source",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_command(name: str, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON run configuration")
        p.add_argument("--preset", choices=["fig2", "fig3", "fig4"], default=None,
                       help="figure preset (effective in sweep mode)")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--out", default=None, help="output file (CSV for sweep, JSON otherwise)")
        p.add_argument("--server", default=None, help="base URL of a running service (default: in-process)")
        return p

    add_run_command("analyze", "single-point statistics, analytic and propagator side by side")
    add_run_command("sweep", "parameter sweep to CSV")
    add_run_command("mc", "Monte Carlo estimates with standard errors")
    add_run_command("attack", "eavesdropping attack reports")
    add_run_command("validate", "cross-check suite; nonzero exit on any failure")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    args = parser.parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK
    return _dispatch(args.command, args)


if __name__ == "__main__":
    sys.exit(main())
