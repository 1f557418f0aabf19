"""Command-line interface: scenario ingestion, batch runs, result emission.

One JSON document describes a scenario (members, rates, optional storage and
central PV); per-interval traces may be inline arrays, scalars broadcast to
the horizon, or columns of a CSV file keyed by member id.  Commands:

* ``simulate`` - run one mechanism, write ``intervals.csv`` + ``summary.json``
* ``price``    - single-point price query for a given aggregate generation
* ``audit``    - axiom and coalition audits, exit 3 on any failure
* ``compare``  - welfare comparison table across mechanisms (or a rate-ratio
  sweep with ``--ratios``)

Exit codes: 0 success, 1 validation failure, 2 I/O failure, 3 failed audit.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .curves import AggregateResponseCurve
from .bess import dispatch_thresholds, generalized_dnem_price
from .model import (
    BessSpec,
    CommunityScenario,
    DeviceUtility,
    Member,
    RateSchedule,
    ScenarioValidationError,
    validate_scenario,
)
from .pricing import compute_thresholds, dnem_price
from .sim import MECHANISMS, folded_generation, rate_ratio_sweep, run
from .welfare import axiom_audit, coalition_audit, welfare_gain

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_AUDIT = 3


class ConfigError(ValueError):
    """The configuration document is malformed or incomplete."""


def _broadcast(value, horizon: int, name: str) -> list[float]:
    if isinstance(value, (int, float)):
        return [float(value)] * horizon
    if isinstance(value, list):
        if len(value) != horizon:
            raise ConfigError(f"{name}: expected {horizon} entries, got {len(value)}")
        return [float(v) for v in value]
    raise ConfigError(f"{name}: expected a number or a list of numbers")


def _read_traces_csv(path: Path) -> dict[str, list[float]]:
    columns: dict[str, list[float]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ConfigError(f"{path}: empty traces CSV")
        for name in reader.fieldnames:
            columns[name] = []
        for row in reader:
            for name in reader.fieldnames:
                columns[name].append(float(row[name]))
    return columns


def load_config(path: str | Path) -> tuple[CommunityScenario, dict]:
    """Parse and validate a scenario config; returns (scenario, canonical dict).

    The canonical dict has every trace resolved inline, so its hash pins the
    exact inputs of a run even when traces came from a CSV file.
    """
    path = Path(path)
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")

    try:
        horizon = int(doc["horizon"])
        rates_doc = doc["rates"]
        members_doc = doc["members"]
    except KeyError as exc:
        raise ConfigError(f"{path}: missing required key {exc}") from exc

    csv_columns: dict[str, list[float]] = {}
    if "traces_csv" in doc:
        csv_path = Path(doc["traces_csv"])
        if not csv_path.is_absolute():
            csv_path = path.parent / csv_path
        csv_columns = _read_traces_csv(csv_path)

    buy = _broadcast(rates_doc.get("buy"), horizon, "rates.buy")
    sell = _broadcast(rates_doc.get("sell"), horizon, "rates.sell")
    rates = RateSchedule(buy, sell, float(rates_doc.get("salvage", 0.0)))

    members = []
    for idx, mdoc in enumerate(members_doc):
        if "id" not in mdoc:
            raise ConfigError(f"members[{idx}]: missing id")
        mid = str(mdoc["id"])
        devices = tuple(
            DeviceUtility(
                alpha=float(d["alpha"]),
                beta=float(d["beta"]),
                d_min=float(d["d_min"]),
                d_max=float(d["d_max"]),
            )
            for d in mdoc.get("devices", [])
        )
        if "pv_trace" in mdoc:
            trace = _broadcast(mdoc["pv_trace"], horizon, f"members[{idx}].pv_trace")
        elif mid in csv_columns:
            trace = _broadcast(csv_columns[mid], horizon, f"traces_csv[{mid}]")
        else:
            trace = [0.0] * horizon
        members.append(
            Member(
                id=mid,
                devices=devices,
                pv_trace=trace,
                central_pv_share=float(mdoc.get("central_pv_share", 0.0)),
                bess_share=float(mdoc.get("bess_share", 0.0)),
            )
        )

    if "central_pv" in doc:
        central = _broadcast(doc["central_pv"], horizon, "central_pv")
    elif "central_pv" in csv_columns:
        central = _broadcast(csv_columns["central_pv"], horizon, "traces_csv[central_pv]")
    else:
        central = [0.0] * horizon

    bess = None
    if "bess" in doc and doc["bess"] is not None:
        b = doc["bess"]
        try:
            bess = BessSpec(
                capacity=float(b["capacity"]),
                charge_eff=float(b.get("charge_eff", 1.0)),
                discharge_eff=float(b.get("discharge_eff", 1.0)),
                max_charge=float(b.get("max_charge", 0.0)),
                max_discharge=float(b.get("max_discharge", 0.0)),
                initial_soc=float(b.get("initial_soc", 0.0)),
            )
        except KeyError as exc:
            raise ConfigError(f"bess: missing required key {exc}") from exc
        if members and all(m.bess_share == 0.0 for m in members):
            # equal storage shares unless the config declares them
            share = 1.0 / len(members)
            members = [
                Member(
                    id=m.id,
                    devices=m.devices,
                    pv_trace=m.pv_trace,
                    central_pv_share=m.central_pv_share,
                    bess_share=share,
                )
                for m in members
            ]

    scenario = validate_scenario(
        CommunityScenario(
            members=tuple(members),
            rates=rates,
            horizon=horizon,
            bess=bess,
            central_pv_trace=central,
        )
    )
    canonical = {
        "horizon": horizon,
        "rates": {"buy": buy, "sell": sell, "salvage": rates.salvage},
        "members": [
            {
                "id": m.id,
                "devices": [[d.alpha, d.beta, d.d_min, d.d_max] for d in m.devices],
                "pv_trace": list(map(float, m.pv_trace)),
                "central_pv_share": m.central_pv_share,
                "bess_share": m.bess_share,
            }
            for m in members
        ],
        "central_pv": central,
        "bess": None
        if bess is None
        else {
            "capacity": bess.capacity,
            "charge_eff": bess.charge_eff,
            "discharge_eff": bess.discharge_eff,
            "max_charge": bess.max_charge,
            "max_discharge": bess.max_discharge,
            "initial_soc": bess.initial_soc,
        },
    }
    return scenario, canonical


def scenario_hash(canonical: dict) -> str:
    blob = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _fmt(value: float) -> str:
    # round first so values like -1e-9 serialise as 0.000000, not -0.000000
    return f"{round(value, 6) + 0.0:.6f}"


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _intervals_csv(scenario: CommunityScenario, records) -> str:
    ids = [m.id for m in scenario.members]
    header = ["t", "price", "zone", "g_N", "d_N", "b_N", "z_N", "soc"]
    for mid in ids:
        header += [f"{mid}_d", f"{mid}_z", f"{mid}_payment", f"{mid}_surplus"]
    lines = [",".join(header)]
    for r in records:
        row = [str(r.t)]
        if r.price is None:
            row += ["", ""]
        else:
            row += [_fmt(r.price.value), r.price.zone.value]
        row += [_fmt(r.g_n), _fmt(r.d_n), _fmt(r.b_n), _fmt(r.z_n), _fmt(r.soc)]
        for o in r.per_member:
            row += [_fmt(o.total_consumption), _fmt(o.net), _fmt(o.payment), _fmt(o.surplus)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _summary_json(scenario, summary, canonical) -> str:
    def opt(value):
        return None if value is None else round(value, 6)

    doc = {
        "mechanism": summary.mechanism,
        "horizon": scenario.horizon,
        "members": len(scenario.members),
        "total_welfare": round(summary.total_welfare, 6),
        "per_member_surplus": {
            m.id: round(s, 6)
            for m, s in zip(scenario.members, summary.per_member_surplus)
        },
        "welfare_gain_vs_standalone_pct": opt(summary.welfare_gain_vs_standalone),
        "welfare_gain_vs_sign_based_pct": opt(summary.welfare_gain_vs_sign_based),
        "zone_histogram": summary.zone_histogram,
        "scenario_hash": scenario_hash(canonical),
        "tool_version": __version__,
        "conventions": {"net_zero_plateau_price": "midpoint"},
    }
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def cmd_simulate(config: str, mechanism: str, out_dir: str) -> int:
    scenario, canonical = load_config(config)
    records, summary = run(scenario, mechanism)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "intervals.csv", _intervals_csv(scenario, records))
    _atomic_write(out / "summary.json", _summary_json(scenario, summary, canonical))
    return EXIT_OK


def cmd_price(config: str, g_n: float, t: int) -> int:
    scenario, _ = load_config(config)
    if not 0 <= t < scenario.horizon:
        raise ConfigError(f"interval {t} outside horizon [0, {scenario.horizon})")
    curve = AggregateResponseCurve.from_members(scenario.members)
    buy = float(scenario.rates.buy[t])
    sell = float(scenario.rates.sell[t])
    thresholds = compute_thresholds(curve, buy, sell)
    doc = {
        "g_N": g_n,
        "t": t,
        "thresholds": {
            "lower": round(thresholds.lower, 6),
            "upper": round(thresholds.upper, 6),
        },
    }
    if scenario.bess is None:
        price = dnem_price(curve, g_n, buy, sell)
    else:
        bess = scenario.bess
        soc = bess.initial_soc
        price, b = generalized_dnem_price(
            curve, g_n, bess, soc, scenario.rates.salvage, buy, sell
        )
        sig = dispatch_thresholds(curve, bess, soc, scenario.rates.salvage)
        doc["storage"] = {
            "soc": round(soc, 6),
            "b": round(b, 6),
            "sigma_plus": round(sig.sigma_plus, 6),
            "sigma_plus_z": round(sig.sigma_plus_z, 6),
            "sigma_minus_z": round(sig.sigma_minus_z, 6),
            "sigma_minus": round(sig.sigma_minus, 6),
            "delta_plus": round(thresholds.lower - sig.eff_discharge, 6),
            "delta_minus": round(thresholds.upper + sig.eff_charge, 6),
        }
    doc["value"] = round(price.value, 6)
    doc["zone"] = price.zone.value
    print(json.dumps(doc, sort_keys=True, default=_json_default))
    return EXIT_OK


def cmd_audit(config: str, mechanism: str, seeds: int, coalition_samples: int) -> int:
    scenario, _ = load_config(config)
    if scenario.bess is not None and coalition_samples > 0:
        print(
            "coalition audits are only defined for storage-free scenarios; "
            "rerun with --coalition-samples 0 or drop the bess section",
            file=sys.stderr,
        )
        return EXIT_VALIDATION

    records, _ = run(scenario, mechanism, compute_gains=False)
    gen = folded_generation(scenario)
    with_storage = scenario.bess is not None

    axioms: dict[str, dict] = {}
    all_passed = True
    for r in records:
        buy = float(scenario.rates.buy[r.t])
        sell = float(scenario.rates.sell[r.t])
        report = axiom_audit(
            list(scenario.members),
            gen[:, r.t],
            r.per_member,
            buy,
            sell,
            check_rationality=not with_storage,
        )
        for check in report.checks:
            entry = axioms.setdefault(
                check.axiom,
                {"passed": True, "worst_slack": 0.0, "interval": None, "detail": ""},
            )
            if check.slack > entry["worst_slack"]:
                entry["worst_slack"] = check.slack
                entry["interval"] = r.t
                entry["detail"] = check.detail
            if not check.passed:
                entry["passed"] = False
                all_passed = False
    for entry in axioms.values():
        entry["worst_slack"] = round(entry["worst_slack"], 9)

    rationality_horizon = None
    if with_storage:
        std_records, _ = run(scenario, "standalone", compute_gains=False)
        worst = 0.0
        for i in range(len(scenario.members)):
            mine = sum(r.per_member[i].reward for r in records)
            base = sum(r.per_member[i].reward for r in std_records)
            worst = max(worst, base - mine)
        rationality_horizon = {"passed": worst <= 1e-9, "worst_slack": round(worst, 9)}
        if worst > 1e-9:
            all_passed = False

    dominance = None
    if scenario.bess is None:
        w_dnem = run(scenario, "dnem", compute_gains=False)[1].total_welfare
        w_sign = run(scenario, "sign_based", compute_gains=False)[1].total_welfare
        dominance = {
            "dnem_welfare": round(w_dnem, 6),
            "sign_based_welfare": round(w_sign, 6),
            "passed": w_dnem >= w_sign - 1e-9,
        }
        if not dominance["passed"]:
            all_passed = False

    coalitions = None
    if coalition_samples > 0:
        n = len(scenario.members)
        ids = [m.id for m in scenario.members]
        failures = 0
        first_failure = None
        worst = 0.0
        total = 0
        for seed in range(seeds):
            rng = np.random.default_rng(seed)
            for _ in range(coalition_samples):
                t = int(rng.integers(0, scenario.horizon))
                superset = [i for i in range(n) if rng.random() < 0.7]
                if not superset:
                    superset = [int(rng.integers(0, n))]
                subset = [i for i in superset if rng.random() < 0.6]
                if not subset:
                    subset = [superset[int(rng.integers(0, len(superset)))]]
                audit = coalition_audit(
                    list(scenario.members),
                    gen[:, t],
                    float(scenario.rates.buy[t]),
                    float(scenario.rates.sell[t]),
                    subset,
                    superset,
                )
                total += 1
                worst = max(worst, -audit.slack)
                if not audit.passed:
                    failures += 1
                    if first_failure is None:
                        first_failure = {
                            "interval": t,
                            "subset": [ids[i] for i in subset],
                            "superset": [ids[i] for i in superset],
                            "slack": round(audit.slack, 12),
                        }
        coalitions = {
            "samples": total,
            "failures": failures,
            "worst_slack": round(worst, 12),
            "first_failure": first_failure,
        }
        if failures:
            all_passed = False

    print(
        json.dumps(
            {
                "mechanism": mechanism,
                "intervals": scenario.horizon,
                "axioms": axioms,
                "individual_rationality_horizon": rationality_horizon,
                "dominance_dnem_over_sign_based": dominance,
                "coalitions": coalitions,
                "passed": all_passed,
            },
            indent=2,
            sort_keys=True,
            default=_json_default,
        )
    )
    return EXIT_OK if all_passed else EXIT_AUDIT


def _compare_rows(scenario: CommunityScenario) -> tuple[list[str], list[list[str]]]:
    zone_names = [
        "NetConsumption",
        "NetZeroDischargeDynamic",
        "NetZeroDischargeFlat",
        "NetZeroIdle",
        "NetZeroChargeFlat",
        "NetZeroChargeDynamic",
        "NetProduction",
    ]
    ids = [m.id for m in scenario.members]
    header = ["mechanism", "bess", "total_welfare", "welfare_gain_pct"]
    header += [f"zone_{z}" for z in zone_names]
    header += [f"{mid}_gain_pct" for mid in ids]

    variants = [("no", None)]
    if scenario.bess is not None:
        variants.append(("yes", scenario.bess))

    rows = []
    for label, bess in variants:
        variant = CommunityScenario(
            members=scenario.members,
            rates=scenario.rates,
            horizon=scenario.horizon,
            bess=bess,
            central_pv_trace=scenario.central_pv_trace,
        )
        summaries = {m: run(variant, m, compute_gains=False)[1] for m in MECHANISMS}
        base = summaries["standalone"]
        for mechanism in MECHANISMS:
            s = summaries[mechanism]
            try:
                gain = welfare_gain(s.total_welfare, base.total_welfare)
            except ValueError:
                gain = None
            row = [mechanism, label, _fmt(s.total_welfare)]
            row.append("" if gain is None else _fmt(gain))
            for z in zone_names:
                row.append(str(s.zone_histogram.get(z, 0)))
            for i in range(len(ids)):
                mine = s.per_member_surplus[i]
                ref = base.per_member_surplus[i]
                row.append("" if ref == 0 else _fmt(100.0 * (mine - ref) / abs(ref)))
            rows.append(row)
    return header, rows


def cmd_compare(config: str, ratios: Optional[Sequence[float]], out: Optional[str]) -> int:
    scenario, _ = load_config(config)
    if ratios:
        header = ["ratio", "welfare_gain_dnem_pct", "welfare_gain_sign_based_pct"]
        rows = []
        for point in rate_ratio_sweep(scenario, ratios):
            rows.append(
                [
                    _fmt(point.ratio),
                    "" if point.welfare_gain_dnem is None else _fmt(point.welfare_gain_dnem),
                    ""
                    if point.welfare_gain_sign_based is None
                    else _fmt(point.welfare_gain_sign_based),
                ]
            )
    else:
        header, rows = _compare_rows(scenario)
    text = "\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n"
    if out:
        _atomic_write(Path(out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dnem",
        description="Energy-community pricing, dispatch and audits under net energy metering",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write CSV/JSON results")
    p.add_argument("--config", required=True)
    p.add_argument("--mechanism", choices=MECHANISMS, default="dnem")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("price", help="community price for one aggregate generation value")
    p.add_argument("--config", required=True)
    p.add_argument("--g", type=float, required=True, help="aggregate generation (kWh)")
    p.add_argument("--t", type=int, default=0, help="interval index")

    p = sub.add_parser("audit", help="axiom and coalition audits")
    p.add_argument("--config", required=True)
    p.add_argument("--mechanism", choices=MECHANISMS, default="dnem")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--coalition-samples", type=int, default=0)

    p = sub.add_parser("compare", help="mechanism comparison table or rate-ratio sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--ratios", type=str, default=None, help="comma-separated sell/buy ratios")
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.mechanism, args.out)
        if args.command == "price":
            return cmd_price(args.config, args.g, args.t)
        if args.command == "audit":
            return cmd_audit(args.config, args.mechanism, args.seeds, args.coalition_samples)
        if args.command == "compare":
            ratios = None
            if args.ratios:
                ratios = [float(r) for r in args.ratios.split(",") if r.strip()]
            return cmd_compare(args.config, ratios, args.out)
        raise AssertionError(f"unhandled command {args.command}")
    except (ScenarioValidationError, ConfigError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
