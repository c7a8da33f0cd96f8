"""Command-line entry point: ``vrscan scan|corpus|rules``."""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .config import ScanConfig
from .errors import ApkError, VrScanError
from .report import aggregate, anonymize, render, scan_app
from .resources import CONFIG_DIR_ENV
from .rules import load_ruleset

EXIT_OK, EXIT_FATAL, EXIT_USAGE = 0, 1, 2


def _config_kwargs(args):
    kw = {"config_dir": args.config_dir}
    for key, attr in (("rules", "rules"), ("taint", "taint_config"), ("trackers", "trackers"),
                      ("biometric", "biometric_table"), ("network", "network_table")):
        val = getattr(args, attr, None)
        if val:
            kw[key] = val
    return kw


def _emit(data, out):
    if out:
        with open(out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _report_dict(report, anon):
    d = report.to_dict()
    return anonymize(d) if anon else d


def cmd_scan(args):
    cfg = ScanConfig.load(**_config_kwargs(args))
    report = scan_app(args.apk, args.policy, cfg)
    _emit(render(_report_dict(report, args.anonymize), args.format), args.out)
    return EXIT_OK


_WORKER_CFG = None


def _worker_init(kw):
    global _WORKER_CFG
    _WORKER_CFG = ScanConfig.load(**kw)


def _scan_one(job):
    apk, policy, anon = job
    try:
        return apk, _report_dict(scan_app(apk, policy, _WORKER_CFG), anon), None
    except (ApkError, OSError) as exc:
        return apk, None, f"{type(exc).__name__}: {exc}"


def corpus_jobs(directory, policies=None, anon=False):
    apks = sorted(f for f in os.listdir(directory) if f.endswith(".apk"))
    jobs = []
    for name in apks:
        policy = None
        if policies:
            base = os.path.splitext(name)[0]
            for ext in (".txt", ".html", ".htm", ".md"):
                cand = os.path.join(policies, base + ext)
                if os.path.isfile(cand):
                    policy = cand
                    break
        jobs.append((os.path.join(directory, name), policy, anon))
    return jobs


def scan_corpus(directory, policies=None, config_kwargs=None, workers=1, anon=False):
    """(reports as dicts keyed by apk file name, failures) in file-name order."""
    jobs = corpus_jobs(directory, policies, anon)
    kw = config_kwargs or {}
    if workers <= 1 or len(jobs) <= 1:
        _worker_init(kw)
        results = [_scan_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init, initargs=(kw,)) as pool:
            results = list(pool.map(_scan_one, jobs, chunksize=4))
    reports = {os.path.basename(a): r for a, r, e in results if r is not None}
    failures = {os.path.basename(a): e for a, r, e in results if e is not None}
    return reports, failures


def cmd_corpus(args):
    if not os.path.isdir(args.dir):
        print(f"error: {args.dir} is not a directory", file=sys.stderr)
        return EXIT_FATAL
    kw = _config_kwargs(args)
    ScanConfig.load(**kw)  # fail early on bad config
    reports, failures = scan_corpus(args.dir, args.policies, kw, args.workers, args.anonymize)
    if args.reports_dir:
        os.makedirs(args.reports_dir, exist_ok=True)
        for name, rep in reports.items():
            with open(os.path.join(args.reports_dir, os.path.splitext(name)[0] + ".json"), "wb") as fh:
                fh.write(render(rep, "json"))
    stats = aggregate(list(reports.values()))
    stats["failures"] = [{"apk": k, "error": v} for k, v in sorted(failures.items())]
    _emit(render(stats, args.format), args.out)
    return EXIT_OK


def cmd_rules_list(args):
    rules = load_ruleset(args.rules) if args.rules else load_ruleset()
    for r in rules:
        print(f"{r.id}\t{r.category}\t{r.severity}\t{r.polarity}\t{r.combine}\t"
              + " | ".join(p.describe() for p in r.predicates))
    return EXIT_OK


def cmd_rules_validate(args):
    rules = load_ruleset(args.file)
    print(f"ok: {len(rules)} rules")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="vrscan", description="Static security and privacy scanner for VR Android apps.")
    p.add_argument("--version", action="version", version=f"vrscan {__version__}")
    p.add_argument("--config-dir", default=os.environ.get(CONFIG_DIR_ENV),
                   help=f"directory of config overrides (default ${CONFIG_DIR_ENV})")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--rules", help="rule set JSON")
        sp.add_argument("--taint-config", help="taint source/sink JSON")
        sp.add_argument("--trackers", help="tracker signature JSON")
        sp.add_argument("--biometric-table", help="biometric function table JSON")
        sp.add_argument("--network-table", help="network API table JSON")
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--format", choices=("json", "md"), default="json")
        sp.add_argument("--anonymize", action="store_true", help="replace package names with an MD5 prefix")

    s = sub.add_parser("scan", help="scan one APK")
    s.add_argument("apk")
    s.add_argument("--policy", help="privacy policy (text or HTML)")
    common(s)
    s.set_defaults(func=cmd_scan)

    c = sub.add_parser("corpus", help="scan every *.apk in a directory and aggregate")
    c.add_argument("dir")
    c.add_argument("--policies", help="directory of policies named like the APKs")
    c.add_argument("--workers", type=int, default=min(4, os.cpu_count() or 1))
    c.add_argument("--reports-dir", help="also write one JSON report per app here")
    common(c)
    c.set_defaults(func=cmd_corpus)

    r = sub.add_parser("rules", help="inspect rule sets")
    rsub = r.add_subparsers(dest="rules_command", required=True)
    rl = rsub.add_parser("list")
    rl.add_argument("--rules", help="rule set JSON (default: bundled)")
    rl.set_defaults(func=cmd_rules_list)
    rv = rsub.add_parser("validate")
    rv.add_argument("file")
    rv.set_defaults(func=cmd_rules_validate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on bad usage
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except VrScanError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
