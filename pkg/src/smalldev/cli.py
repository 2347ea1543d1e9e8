"""Command-line front end: ``smalldev {theory,spectrum,smallball,verify}``.

Outputs land in ``output_dir``::

    constants.json  spectrum_N<N>.csv  counting_N<N>.csv
    smallball.csv   smallball.json     report.json   plots/*.dat

Exit status: 0 on success (for ``verify``: every acceptance flag passed),
1 when a verify flag failed, 2 for usage/config/domain errors and 3 when a
pipeline stage failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from ._io import write_csv, write_json, write_text
from .config import RunConfig, load_config
from .exceptions import ConfigError, DomainError, ModelError, RegimeError, SmallDevError
from .model import IID, autocovariance, materialize, spec_to_mapping, weights_to_mapping
from .operator import (build, fit_decay_constant, spectrum, tail_completed_eigenvalues,
                       tail_index_for, write_counting_csv, write_spectrum_csv)
from .smallball import (direct_sim_log_prob, saddlepoint_log_prob, tilted_mc_log_prob)
from .theory import predicted_log_smalldev, theory_constants


class StageError(SmallDevError):
    def __init__(self, stage, err):
        super().__init__(f"[{stage}] {err}")
        self.stage = stage
        self.cause = err


def _dat(path, header, rows):
    lines = ["# " + " ".join(header)]
    lines += [" ".join(repr(float(v)) for v in row) for row in rows]
    write_text(path, "\n".join(lines) + "\n")


class Pipeline:
    """Runs the stages for one configuration and caches intermediate results."""

    def __init__(self, cfg: RunConfig, out_dir=None):
        self.cfg = cfg
        self.out_dir = out_dir or cfg.output_dir
        self._window = None
        self._theory = None
        self._spectra = {}

    def _path(self, *parts):
        path = os.path.join(self.out_dir, *parts)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        return path

    @property
    def window(self):
        if self._window is None:
            self._window = materialize(self.cfg.model, self.cfg.window_tol)
        return self._window

    # -- theory -------------------------------------------------------------
    def theory(self):
        if self._theory is not None:
            return self._theory
        cfg = self.cfg
        w = cfg.weights.homogeneous()
        th = theory_constants(self.window, w, cfg.quad_rel_tol, spec=cfg.model)
        variance = autocovariance(self.window, 0)
        iid = theory_constants(materialize(IID(math.sqrt(variance)), 1.0), w, cfg.quad_rel_tol)
        combined_tol = cfg.quad_rel_tol * (th.C + iid.C)
        comparison = {
            "variance": variance,
            "C_dependent": th.C,
            "C_iid_matched_variance": iid.C,
            "abs_difference": abs(th.C - iid.C),
            "combined_quadrature_tol": combined_tol,
            "differs": abs(th.C - iid.C) > 5.0 * combined_tol,
        }
        self._theory = {
            "model": spec_to_mapping(cfg.model),
            "weights": weights_to_mapping(cfg.weights),
            "window": {"length": len(self.window), "offset": self.window.offset,
                       "tail_mass": self.window.tail_mass},
            "theory": th.to_dict(),
            "dependence_comparison": comparison,
        }
        write_json(self._path("constants.json"), self._theory)
        return self._theory

    # -- spectra ------------------------------------------------------------
    def spectrum_for(self, N):
        if N not in self._spectra:
            op = build(self.window, self.cfg.weights, N)
            self._spectra[N] = spectrum(op)
        return self._spectra[N]

    def spectrum_table(self):
        cfg = self.cfg
        if not cfg.N_list:
            raise ConfigError("N list is empty; set [run] N")
        p = cfg.weights.p
        C = self.theory()["theory"]["C"]
        rows = []
        for N in cfg.N_list:
            spec = self.spectrum_for(N)
            fit = fit_decay_constant(spec, p, cfg.fit_range)
            write_spectrum_csv(spec, p, self._path(f"spectrum_N{N}.csv"))
            write_counting_csv(spec, self._path(f"counting_N{N}.csv"))
            n = np.arange(1, len(spec) + 1)
            _dat(self._path("plots", f"lambda_scaled_N{N}.dat"), ["n", "lambda_n_n2p"],
                 zip(n, spec.scaled_eigenvalues(p)))
            rows.append({"N": N, **fit.to_dict(), "C": C, "gap": abs(fit.C_hat / C - 1.0),
                         "trace": float(np.sum(spec.eigenvalues))})
        gaps = [r["gap"] for r in rows]
        summary = {"fits": rows,
                   "gap_monotone": all(b <= a for a, b in zip(gaps, gaps[1:]))}
        write_json(self._path("spectrum_fits.json"), summary)
        return summary

    # -- small deviations -----------------------------------------------------
    def _estimate(self, method, N, eps):
        cfg = self.cfg
        if method == "saddlepoint":
            return saddlepoint_log_prob(self.spectrum_for(N), eps, cfg.order)
        if method == "tilted_mc":
            return tilted_mc_log_prob(self.spectrum_for(N), eps, cfg.samples, cfg.seed)
        return direct_sim_log_prob(cfg.model, cfg.weights, N, eps, cfg.samples, cfg.seed,
                                   tol=cfg.window_tol)

    def smallball_rows(self):
        cfg = self.cfg
        if not cfg.N_list or not cfg.eps_grid:
            raise ConfigError("smallball needs a nonempty N list and eps grid")
        th = self.theory()["theory"]
        rows = []
        for N in cfg.N_list:
            total = float(np.sum(self.spectrum_for(N).eigenvalues))
            for eps in cfg.eps_grid:
                pred = predicted_log_smalldev(th["p"], th["C"], eps)
                for method in cfg.methods:
                    row = {"N": N, "eps": eps, "method": method, "predicted": pred}
                    if eps * eps >= total:
                        row["status"] = "regime"
                        rows.append(row)
                        continue
                    try:
                        est = self._estimate(method, N, eps)
                    except RegimeError:
                        row["status"] = "regime"
                    except SmallDevError as err:
                        row["status"] = f"failed: {err}"
                    else:
                        row.update(est.to_dict())
                        row["ratio"] = est.log_prob / pred
                        row["status"] = "ok"
                    rows.append(row)
        header = ["N", "eps", "method", "log_prob", "std_err", "saddle_t", "samples", "seed",
                  "predicted", "ratio", "status"]
        write_csv(self._path("smallball.csv"), header,
                  ([_cell(r.get(h)) for h in header] for r in rows))
        write_json(self._path("smallball.json"), rows)
        return rows

    # -- verification -------------------------------------------------------
    def ratio_rows(self, spec_summary):
        """Saddlepoint ratios ``ln P / predicted`` at the largest ``N``."""
        cfg = self.cfg
        p = cfg.weights.p
        th = self.theory()["theory"]
        N = cfg.N_list[-1]
        spec = self.spectrum_for(N)
        fit = next(r for r in spec_summary["fits"] if r["N"] == N)
        completed = None
        n_max = None
        if cfg.tail == "fitted":
            n_max = max(len(spec), tail_index_for(fit["C_hat"], p, cfg.eps_grid[-1]))
            fit_obj = fit_decay_constant(spec, p, (fit["n_lo"], fit["n_hi"]))
            completed = tail_completed_eigenvalues(spec, fit_obj, p, n_max)
        rows = []
        for eps in cfg.eps_grid:
            pred = predicted_log_smalldev(p, th["C"], eps)
            row = {"eps": eps, "predicted": pred, "N": N, "tail": cfg.tail, "n_max": n_max}
            try:
                trunc = saddlepoint_log_prob(spec, eps, cfg.order)
                row["log_prob_truncated"] = trunc.log_prob
                row["ratio_truncated"] = trunc.log_prob / pred
            except RegimeError:
                row["ratio_truncated"] = None
            if completed is not None:
                est = saddlepoint_log_prob(completed, eps, cfg.order)
                row["log_prob"] = est.log_prob
                row["ratio"] = est.log_prob / pred
            else:
                row["log_prob"] = row.get("log_prob_truncated")
                row["ratio"] = row["ratio_truncated"]
            rows.append(row)
        _dat(self._path("plots", "ratio.dat"), ["eps", "R", "R_truncated"],
             ([r["eps"], _nan(r["ratio"]), _nan(r["ratio_truncated"])] for r in rows))
        return rows

    def verify(self):
        cfg = self.cfg
        if len(cfg.N_list) < 2 or len(cfg.eps_grid) < 3:
            raise ConfigError("verify needs at least two N values and three eps values")
        stages = [("theory", self.theory), ("spectrum", self.spectrum_table)]
        results = {}
        for name, fn in stages:
            try:
                results[name] = fn()
            except SmallDevError as err:
                raise StageError(name, err) from err
        try:
            ratios = self.ratio_rows(results["spectrum"])
            sb = self.smallball_rows() if any(m != "saddlepoint" for m in cfg.methods) else []
        except SmallDevError as err:
            raise StageError("smallball", err) from err

        th = results["theory"]["theory"]
        flags = {}
        ident_err = abs(th["C"] - th["Delta_mu"] ** (2 * th["p"])) / th["C"]
        flags["constants_identity"] = _flag(ident_err, 10 * cfg.quad_rel_tol,
                                            "|C - Delta_mu^(2p)| / C")
        last = results["spectrum"]["fits"][-1]
        flags["spectrum_gap"] = _flag(last["gap"], cfg.gap_tol,
                                      f"|C_hat/C - 1| at N={last['N']}")
        dev = [abs(r["ratio"] - 1.0) if r["ratio"] is not None else math.inf for r in ratios]
        trend_ok = all(b <= a for a, b in zip(dev, dev[1:])) and all(map(math.isfinite, dev))
        flags["ratio_trend"] = {"passed": bool(trend_ok), "value": dev,
                                "rule": "|R(eps)-1| nonincreasing as eps decreases"}
        flags["ratio_band"] = _flag(dev[-1], cfg.ratio_tol,
                                    f"|R(eps_min)-1| at eps={cfg.eps_grid[-1]}")
        agree = _mc_agreement(sb)
        if agree is not None:
            flags["mc_agreement"] = agree

        report = {
            "theory": th,
            "dependence_comparison": results["theory"]["dependence_comparison"],
            "spectrum_fits": results["spectrum"]["fits"],
            "gap_monotone": results["spectrum"]["gap_monotone"],
            "ratios": ratios,
            "smallball": sb,
            "flags": flags,
            "passed": all(f["passed"] for f in flags.values()),
            "provenance": {"config_sha256": cfg.digest(), "seed": cfg.seed,
                           "version": __version__,
                           "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())},
        }
        write_json(self._path("report.json"), report)
        return report


def _nan(x):
    return float("nan") if x is None else x


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _flag(value, threshold, rule):
    return {"passed": bool(value <= threshold), "value": value, "threshold": threshold,
            "rule": rule}


def _mc_agreement(rows):
    by_cell = {}
    for r in rows:
        if r.get("status") == "ok" and r["method"] in ("tilted_mc", "direct_sim"):
            by_cell.setdefault((r["N"], r["eps"]), {})[r["method"]] = r
    checks = []
    for (N, eps), m in sorted(by_cell.items()):
        if len(m) == 2:
            a, b = m["tilted_mc"], m["direct_sim"]
            se = math.hypot(a["std_err"], b["std_err"])
            checks.append({"N": N, "eps": eps, "z": abs(a["log_prob"] - b["log_prob"]) / se})
    if not checks:
        return None
    return {"passed": all(c["z"] <= 3.0 for c in checks), "value": checks, "threshold": 3.0,
            "rule": "|tilted_mc - direct_sim| <= 3 combined std errors"}


# -- command wrappers ----------------------------------------------------------

def cmd_theory(cfg, out_dir=None):
    return Pipeline(cfg, out_dir).theory()


def cmd_spectrum(cfg, out_dir=None):
    return Pipeline(cfg, out_dir).spectrum_table()


def cmd_smallball(cfg, out_dir=None):
    return Pipeline(cfg, out_dir).smallball_rows()


def cmd_verify(cfg, out_dir=None):
    return Pipeline(cfg, out_dir).verify()


def _print_human(cmd, result, stream):
    if cmd == "theory":
        th = result["theory"]
        for key in ("p", "B_p", "C", "Delta_mu", "sd_exponent", "quadrature_grid",
                    "quadrature_rel_err"):
            print(f"{key:>20s} = {th[key]!r}", file=stream)
        dc = result["dependence_comparison"]
        print(f"{'C (iid, same var)':>20s} = {dc['C_iid_matched_variance']!r}", file=stream)
    elif cmd == "spectrum":
        print(f"{'N':>6s} {'C_hat':>14s} {'IQR':>10s} {'C':>14s} {'gap':>10s}", file=stream)
        for r in result["fits"]:
            print(f"{r['N']:6d} {r['C_hat']:14.8g} {r['dispersion']:10.3g} {r['C']:14.8g} "
                  f"{r['gap']:10.3g}", file=stream)
    elif cmd == "smallball":
        for r in result:
            lp = r.get("log_prob")
            lp_s = f"{lp:14.6g}" if lp is not None else f"{'-':>14s}"
            print(f"N={r['N']:<6d} eps={r['eps']:<10.4g} {r['method']:<12s} {lp_s} "
                  f"pred={r['predicted']:.6g} {r['status']}", file=stream)
    else:
        for name, f in result["flags"].items():
            print(f"{'PASS' if f['passed'] else 'FAIL'}  {name}: {f['rule']}", file=stream)
        for r in result["ratios"]:
            print(f"  eps={r['eps']:<8.4g} R={_nan(r['ratio']):.6f} "
                  f"R_truncated={_nan(r['ratio_truncated']):.6f}", file=stream)


def build_parser():
    ap = argparse.ArgumentParser(prog="smalldev", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("theory", "spectrum", "smallball", "verify"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="INI run configuration")
        sp.add_argument("--seed", type=int, help="override [run] seed")
        sp.add_argument("--out", help="output directory (overrides [run] output_dir)")
        sp.add_argument("--samples", type=int, help="override [run] samples")
        sp.add_argument("--json", action="store_true", help="print the JSON result to stdout")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, samples=args.samples)
        fn = {"theory": cmd_theory, "spectrum": cmd_spectrum, "smallball": cmd_smallball,
              "verify": cmd_verify}[args.command]
        result = fn(cfg, args.out)
    except (ConfigError, DomainError, ModelError) as err:
        print(f"smalldev: error: {err}", file=sys.stderr)
        return 2
    except SmallDevError as err:
        print(f"smalldev: stage failure: {err}", file=sys.stderr)
        return 3
    if args.json:
        json.dump(result, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        _print_human(args.command, result, sys.stdout)
    if args.command == "verify":
        return 0 if result["passed"] else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
