"""Command-line interface: keys, sessions, embedding, extraction, and analysis reports.

Exit codes: 0 success (or pass), 1 analysis bound failed, 2 input error,
3 protocol or format mismatch, 4 enumeration cap exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analysis
from .bits import bits_to_str, str_to_bits
from .channel import ChannelModel, channel_from_dict, load_channel_file
from .errors import EnumerationTooLarge, FormatError, ParameterError, StegoError
from .extractor import ExtractorParams, affine_subspace_sources, all_seed_tables, flat_source_seed_distances
from .otstego import (
    advance_history,
    derive_params,
    key_from_text,
    key_to_text,
    keygen,
    sd_decode,
    se_encode,
    stegotext_from_line,
    stegotext_to_line,
)
from .stream import PrgState, StreamSession, session_from_text, session_to_text, stream_decode, stream_encode

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_MISMATCH, EXIT_CAP = 0, 1, 2, 3, 4


class InputError(Exception):
    """Unreadable or invalid user input (exit code 2)."""


# -- input helpers -------------------------------------------------------------


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write(path: Optional[str], text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _channel(path: str) -> ChannelModel:
    _read(path)
    try:
        return load_channel_file(path)
    except (StegoError, ValueError) as exc:
        raise InputError(f"invalid channel file {path}: {exc}") from None


def _message(path: str):
    text = "".join(_read(path).split())
    if not text:
        raise InputError(f"message file {path} is empty")
    try:
        return str_to_bits(text)
    except FormatError as exc:
        raise InputError(f"message file {path}: {exc}") from None


def _history(path: Optional[str], c: ChannelModel) -> tuple:
    if path is None:
        return ()
    try:
        return c.symbols_to_indices(_read(path).split())
    except StegoError as exc:
        raise InputError(f"history file {path}: {exc}") from None


def _key(path: str):
    try:
        return key_from_text(_read(path))
    except (FormatError, ParameterError) as exc:
        raise InputError(f"invalid key file {path}: {exc}") from None


def _rng(args) -> np.random.Generator:
    return np.random.default_rng(args.rng_seed)


def _derive(nu, c, channel, args):
    delta = args.delta if args.delta is not None else channel.min_entropy
    try:
        return derive_params(nu, c, delta, channel.bits_per_symbol, args.eps, args.rho)
    except ParameterError as exc:
        raise InputError(str(exc)) from None


def _log(args, msg: str):
    if args.verbose:
        print(msg, file=sys.stderr)


# -- commands ------------------------------------------------------------------


def cmd_keygen(args) -> int:
    channel = _channel(args.channel)
    params = _derive(args.nu, args.c, channel, args)
    key = keygen(params, _rng(args))
    _write(args.out, key_to_text(key))
    _log(args, f"eta={params.block_bits} ell={params.ell} t={params.t} lambda={params.lam} d={params.extractor.d}")
    return EXIT_OK


def cmd_embed(args) -> int:
    key = _key(args.key)
    channel = _channel(args.channel)
    message = _message(args.message)
    h = _history(args.history, channel)
    st = se_encode(key, message, channel, h, _rng(args))
    _write(args.out, stegotext_to_line(st, channel))
    if args.history_out:
        _write(args.history_out, " ".join(channel.indices_to_symbols(advance_history(h, st))) + "\n")
    _log(args, f"lambda={len(st.symbols)} draws={list(st.draws)} hits={list(st.hits)}")
    return EXIT_OK


def cmd_extract(args) -> int:
    key = _key(args.key)
    channel = _channel(args.channel)
    line = _read(args.stegotext)
    st = stegotext_from_line(line, channel, key.params)
    _write(args.out, bits_to_str(sd_decode(key, st)) + "\n")
    if args.history_out:
        h = _history(args.history, channel)
        _write(args.history_out, " ".join(channel.indices_to_symbols(advance_history(h, st))) + "\n")
    return EXIT_OK


def cmd_validate_channel(args) -> int:
    c = _channel(args.channel)
    print(f"ok: {c.kind} order={c.order} alphabet={len(c.alphabet)} symbols min_entropy={c.min_entropy:.6f}")
    return EXIT_OK


def _template(args) -> dict:
    return {"c": args.c, "delta": args.delta, "eps_sec": args.eps, "rho": args.rho}


def cmd_session_init(args) -> int:
    channel = _channel(args.channel)
    if args.master is not None:
        try:
            master = bytes.fromhex(args.master)
        except ValueError:
            raise InputError("--master must be hex") from None
    else:
        master = _rng(args).bytes(32)
    sess = StreamSession(PrgState.fresh(master), channel, _history(args.history, channel))
    _write(args.out, session_to_text(sess))
    return EXIT_OK


def _load_session(args, channel) -> StreamSession:
    try:
        return session_from_text(_read(args.session), channel, **_template(args))
    except FormatError as exc:
        raise InputError(f"invalid session file {args.session}: {exc}") from None


def cmd_session_embed(args) -> int:
    channel = _channel(args.channel)
    sess = _load_session(args, channel)
    st = stream_encode(sess, _message(args.message), _rng(args))
    _write(args.out, stegotext_to_line(st, channel))
    Path(args.session_out or args.session).write_text(session_to_text(sess))
    _log(args, f"lambda={len(st.symbols)} draws={list(st.draws)} N={sess.prg.n_consumed}")
    return EXIT_OK


def cmd_session_extract(args) -> int:
    channel = _channel(args.channel)
    sess = _load_session(args, channel)
    params = sess.params_for(args.nu)
    st = stegotext_from_line(_read(args.stegotext), channel, params)
    bits = stream_decode(sess, st, args.nu)
    _write(args.out, bits_to_str(bits) + "\n")
    Path(args.session_out or args.session).write_text(session_to_text(sess))
    return EXIT_OK


# -- analyze -------------------------------------------------------------------


def _instance(path: str) -> dict:
    try:
        doc = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise InputError(f"instance file {path} is not JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InputError("instance file must hold a JSON object")
    return doc


def _instance_channel(doc: dict, base: Path) -> ChannelModel:
    if "channel" in doc:
        try:
            return channel_from_dict(doc["channel"])
        except (StegoError, ValueError) as exc:
            raise InputError(f"invalid channel in instance: {exc}") from None
    if "channel_file" in doc:
        return _channel(str(base / doc["channel_file"]))
    raise InputError("instance needs 'channel' or 'channel_file'")


def _instance_params(doc: dict, channel: ChannelModel):
    try:
        return derive_params(
            int(doc["nu"]),
            int(doc.get("c", 4)),
            float(doc.get("delta", channel.min_entropy)),
            channel.bits_per_symbol,
            doc.get("eps"),
            doc.get("rho"),
        )
    except KeyError as exc:
        raise InputError(f"instance is missing {exc}") from None
    except (ParameterError, ValueError) as exc:
        raise InputError(f"instance parameters: {exc}") from None


def _analyze_extractor(doc: dict) -> analysis.BoundReport:
    try:
        n, k, m = int(doc["n"]), int(doc["k"]), int(doc["m"])
    except KeyError as exc:
        raise InputError(f"extractor instance is missing {exc}") from None
    eps = float(doc.get("eps", 2.0 ** (-(k - m) / 2)))
    try:
        p = ExtractorParams.toeplitz(n, k, m, eps)
    except ParameterError as exc:
        raise InputError(str(exc)) from None
    tables = all_seed_tables(p)
    worst, sources = 0, 0
    for support in affine_subspace_sources(n, k):
        worst = max(worst, int(flat_source_seed_distances(tables, support, m).sum()))
        sources += 1
    # mean over seeds of per-seed numerators over 2**(k+m+1)
    measured = worst / (tables.shape[0] * 2 ** (k + m + 1))
    return analysis.BoundReport.check(measured, p.lhl_error, exact=True,
                                      extras={"sources": sources, "seeds": tables.shape[0]})


def cmd_analyze(args) -> int:
    doc = _instance(args.instance)
    rng = _rng(args)
    with analysis.Stopwatch() as sw:
        if args.kind == "extractor":
            report = _analyze_extractor(doc)
        else:
            channel = _instance_channel(doc, Path(args.instance).parent)
            params = _instance_params(doc, channel)
            try:
                h = channel.symbols_to_indices(str(doc.get("history", "")).split())
            except StegoError as exc:
                raise InputError(f"instance history: {exc}") from None
            if args.kind == "distance":
                report = analysis.check_security(params, channel, h, max_seeds=args.max_seeds, rng=rng)
            elif args.kind == "soundness":
                report = analysis.measure_soundness(params, channel, args.trials, rng, h)
            else:
                report = _analyze_game(args, params, channel, h, rng)
    name = doc.get("name", Path(args.instance).stem)
    _write(args.out, analysis.report_to_text(report, f"{args.kind}:{name}", sw.elapsed))
    return EXIT_OK if report.passed else EXIT_FAIL


def _analyze_game(args, params, channel, h, rng):
    adv_rng = np.random.default_rng(rng.integers(1 << 63))
    if args.adversary == "random":
        result = analysis.run_warden_game(params, channel, analysis.RandomAdversary(adv_rng), args.trials, rng)
        return analysis.game_report(result)
    adversary = analysis.LikelihoodRatioAdversary(params, channel, adv_rng, h)
    result = analysis.run_warden_game(params, channel, adversary, args.trials, rng)
    ref = analysis.seed_averaged_stego_distance(params, channel, h, max_seeds=args.max_seeds, rng=rng)
    return analysis.game_report(result, ref.value)


# -- parser --------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, overrides: bool = False):
    p.add_argument("--rng-seed", type=int, default=None, help="seed for a reproducible run")
    p.add_argument("-v", "--verbose", action="store_true")
    if overrides:
        p.add_argument("--c", type=int, default=4, help="block-size constant")
        p.add_argument("--eps", type=float, default=None, help="security parameter eps_sec")
        p.add_argument("--rho", type=int, default=None, help="rejection-sampling retry bound")
        p.add_argument("--delta", type=float, default=None, help="per-symbol min-entropy (default: channel's)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stegokit", description="Provably secure steganography toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a one-time key")
    p.add_argument("--nu", type=int, required=True, help="message length in bits")
    p.add_argument("--channel", required=True)
    p.add_argument("--out")
    _common(p, overrides=True)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("embed", help="hide a message file in stegotext")
    p.add_argument("--key", required=True)
    p.add_argument("--message", required=True, help="file of 0/1 characters")
    p.add_argument("--channel", required=True)
    p.add_argument("--history")
    p.add_argument("--history-out")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("extract", help="recover a message from stegotext")
    p.add_argument("--key", required=True)
    p.add_argument("--stegotext", required=True)
    p.add_argument("--channel", required=True, help="needed for the alphabet")
    p.add_argument("--history")
    p.add_argument("--history-out")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("validate-channel", help="check a channel file")
    p.add_argument("--channel", required=True)
    _common(p)
    p.set_defaults(func=cmd_validate_channel)

    p = sub.add_parser("analyze", help="check a bound on an instance and write a report")
    p.add_argument("kind", choices=["distance", "soundness", "game", "extractor"])
    p.add_argument("--instance", required=True, help="JSON instance file")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--adversary", choices=["random", "lr"], default="random")
    p.add_argument("--max-seeds", type=int, default=1 << 16)
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("session-init", help="start a multi-message session")
    p.add_argument("--channel", required=True)
    p.add_argument("--master", help="master key as hex (default: random)")
    p.add_argument("--history")
    p.add_argument("--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_session_init)

    for name, func in (("session-embed", cmd_session_embed), ("session-extract", cmd_session_extract)):
        p = sub.add_parser(name, help="next message of a session")
        p.add_argument("--session", required=True)
        p.add_argument("--session-out", help="where to write the advanced session (default: in place)")
        p.add_argument("--channel", required=True)
        if name == "session-embed":
            p.add_argument("--message", required=True)
        else:
            p.add_argument("--stegotext", required=True)
            p.add_argument("--nu", type=int, required=True)
        p.add_argument("--out")
        _common(p, overrides=True)
        p.set_defaults(func=func)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "trials", 1) is not None and getattr(args, "trials", 1) < 1:
        print("error: --trials must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EnumerationTooLarge as exc:
        print(f"error: {exc}; shrink the instance (smaller t, nu or alphabet)", file=sys.stderr)
        return EXIT_CAP
    except StegoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
