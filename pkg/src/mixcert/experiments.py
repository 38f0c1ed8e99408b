"""Experiment drivers behind the CLI.

Each runner consumes a JSON config dict, writes stamped CSV files into an
output directory, and returns the written paths.  Sweep points are
independent, so a worker pool may evaluate them concurrently; rows are
always assembled in grid order, which keeps outputs byte-identical for any
worker count.
"""

import math
import os

import numpy as np

from ._parallel import parallel_map
from .attacks import pgd_attack
from .certification import Certificate, certify_dataset
from .io import (
    attack_spec_from,
    build_dataset,
    load_base_classifier,
    read_csv,
    wrap_smoothed,
    write_csv,
)
from .mixing import MixedClassifier
from .oracle import verify_certificate
from .smoothing import SmoothedClassifier, smoothed_probs_mc

CERTIFICATE_HEADER = (
    "index", "label", "y", "y_prime", "margin", "radius", "method", "alpha", "flags", "norm",
)


def _check_grid(values, name: str) -> list[float]:
    values = [float(v) for v in values]
    if not values:
        raise ValueError(f"{name} must be nonempty")
    if values != sorted(values):
        raise ValueError(f"{name} must be sorted ascending")
    return values


def resolve_path(name: str, out_dir: str, config_dir: str = ".") -> str:
    """Resolve a model/data path: absolute as-is, else out_dir, cwd, config dir."""
    if os.path.isabs(name):
        return name
    for root in (out_dir, ".", config_dir):
        candidate = os.path.join(root, name)
        if os.path.exists(candidate):
            return candidate
    return os.path.join(out_dir, name)


def _accuracy(clf, X, y) -> float:
    return float(np.mean(np.asarray(clf.predict(X)) == y))


def _load_pair(config, out_dir, config_dir):
    g = load_base_classifier(resolve_path(config["standard_model"], out_dir, config_dir))
    h = load_base_classifier(resolve_path(config["robust_model"], out_dir, config_dir))
    return g, h


def build_mixed(g, h, mix_cfg: dict) -> MixedClassifier:
    formulation = mix_cfg.get("formulation", "alpha")
    return MixedClassifier(
        g=g,
        h=h,
        formulation=formulation,
        alpha=mix_cfg.get("alpha") if formulation == "alpha" else None,
        gamma=mix_cfg.get("gamma") if formulation != "alpha" else None,
        r_mode=mix_cfg.get("r_mode", "one"),
        domain=mix_cfg.get("domain", "probability"),
        norm=mix_cfg.get("norm", "inf"),
    )


def default_gamma_grid() -> list[float]:
    return [0.0] + [float(10.0 ** e) for e in np.linspace(-2, 3, 11)]


def run_alpha_sweep(config, out_dir, workers=1, config_dir=".") -> list[str]:
    """Clean and attacked accuracy of the mixture across a grid of alpha.

    The STD and ROB perturbations do not depend on alpha and are crafted
    once; the MIX attack differentiates each mixture end to end.
    """
    ds = build_dataset(config["dataset"], "test")
    g, h = _load_pair(config, out_dir, config_dir)
    X, y = ds.X, ds.y
    spec = config["attack"]
    x_std = pgd_attack(g, X, y, attack_spec_from(spec, "STD"), clip_box=ds.clip_box)
    x_rob = pgd_attack(h, X, y, attack_spec_from(spec, "ROB"), clip_box=ds.clip_box)
    grid = _check_grid(config.get("alpha_grid", np.linspace(0, 1, 21)), "alpha grid")
    mix_spec = attack_spec_from(spec, "MIX")

    def point(alpha: float):
        mix = MixedClassifier(g=g, h=h, alpha=alpha)
        x_mix = pgd_attack(mix, X, y, mix_spec, clip_box=ds.clip_box)
        return (
            alpha,
            _accuracy(mix, X, y),
            _accuracy(mix, x_std, y),
            _accuracy(mix, x_rob, y),
            _accuracy(mix, x_mix, y),
        )

    rows = parallel_map(point, grid, workers)
    g_clean, h_clean = _accuracy(g, X, y), _accuracy(h, X, y)
    g_att, h_att = _accuracy(g, x_std, y), _accuracy(h, x_rob, y)
    rows = [row + (g_clean, h_clean, g_att, h_att) for row in rows]
    path = os.path.join(out_dir, "alpha_sweep.csv")
    write_csv(
        path,
        (
            "alpha", "clean_acc", "attacked_acc_std", "attacked_acc_rob", "attacked_acc_mix",
            "g_clean_acc", "h_clean_acc", "g_attacked_acc", "h_attacked_acc",
        ),
        rows,
        config,
    )
    paths = [path]
    if config.get("svg"):
        from .render import render_curves

        svg = os.path.join(out_dir, "alpha_sweep.svg")
        alphas = [r[0] for r in rows]
        render_curves(
            svg, "alpha", "accuracy",
            [
                ("clean", alphas, [r[1] for r in rows]),
                ("attacked (std)", alphas, [r[2] for r in rows]),
                ("attacked (rob)", alphas, [r[3] for r in rows]),
                ("attacked (mix)", alphas, [r[4] for r in rows]),
            ],
        )
        paths.append(svg)
    return paths


def _pareto_front(points):
    """Indices of points not dominated in (clean, attacked), both maximized."""
    order = sorted(range(len(points)), key=lambda k: (-points[k][0], -points[k][1]))
    best = -math.inf
    keep = []
    for k in order:
        if points[k][1] > best:
            keep.append(k)
            best = points[k][1]
    return sorted(keep)


def run_design_study(config, out_dir, workers=1, config_dir=".") -> list[str]:
    """Trade-off curves for every trust-factor mode and mixing domain."""
    ds = build_dataset(config["dataset"], "test")
    g, h = _load_pair(config, out_dir, config_dir)
    X, y = ds.X, ds.y
    spec = attack_spec_from(config["attack"], "MIX")
    norm = config["attack"].get("norm", "inf")
    grid = _check_grid(config.get("gamma_grid", default_gamma_grid()), "gamma grid")
    r_modes = config.get("r_modes", ["one", "grad_gi", "grad_max_gj", "grad_ratio"])
    domains = config.get("domains", ["probability", "logit"])

    paths = []
    pareto_rows = []
    svg_series = []
    for r_mode in r_modes:
        for domain in domains:
            def point(gamma: float):
                mix = MixedClassifier(
                    g=g, h=h, formulation="smo3", gamma=gamma,
                    r_mode=r_mode, domain=domain, norm=norm,
                )
                x_adv = pgd_attack(mix, X, y, spec, clip_box=ds.clip_box)
                return (gamma, _accuracy(mix, X, y), _accuracy(mix, x_adv, y))

            rows = parallel_map(point, grid, workers)
            path = os.path.join(out_dir, f"design_study_{r_mode}_{domain}.csv")
            write_csv(path, ("gamma", "clean_acc", "attacked_acc"), rows, config)
            paths.append(path)
            front = _pareto_front([(r[1], r[2]) for r in rows])
            pareto_rows += [(r_mode, domain) + rows[k] for k in front]
            svg_series.append(
                (f"{r_mode}/{domain}", [r[1] for r in rows], [r[2] for r in rows])
            )
    summary = os.path.join(out_dir, "design_study_pareto.csv")
    write_csv(
        summary, ("r_mode", "domain", "gamma", "clean_acc", "attacked_acc"), pareto_rows, config
    )
    paths.append(summary)
    if config.get("svg"):
        from .render import render_curves

        svg = os.path.join(out_dir, "design_study.svg")
        render_curves(svg, "clean accuracy", "attacked accuracy", svg_series)
        paths.append(svg)
    return paths


def run_confidence_table(config, out_dir, workers=1, config_dir=".") -> list[str]:
    """Mean/median top-two probability gaps, split by clean/attacked and
    correct/incorrect, for both base classifiers."""
    ds = build_dataset(config["dataset"], "test")
    g, h = _load_pair(config, out_dir, config_dir)
    X, y = ds.X, ds.y
    rows = []
    for tag, clf, target in (("g", g, "STD"), ("h", h, "ROB")):
        spec = attack_spec_from(config["attack"], target)
        x_adv = pgd_attack(clf, X, y, spec, clip_box=ds.clip_box)
        for instances, Xe in (("clean", X), ("attacked", x_adv)):
            probs = np.asarray(clf.predict_proba(Xe))
            preds = np.argmax(probs, axis=1)
            top_two = np.sort(probs, axis=1)
            gaps = top_two[:, -1] - top_two[:, -2]
            for verdict, mask in (("correct", preds == y), ("incorrect", preds != y)):
                count = int(mask.sum())
                if count == 0:
                    rows.append((tag, instances, verdict, 0, None, None, None))
                    continue
                mean = float(gaps[mask].mean())
                median = float(np.median(gaps[mask]))
                rows.append((tag, instances, verdict, count, mean, median, mean >= median))
    path = os.path.join(out_dir, "confidence_table.csv")
    write_csv(
        path,
        ("model", "instances", "prediction", "count", "mean_gap", "median_gap", "mean_ge_median"),
        rows,
        config,
    )
    return [path]


def run_certified_curve(config, out_dir, workers=1, config_dir=".") -> list[str]:
    """Certified accuracy against radius for each requested method/alpha."""
    ds = build_dataset(config["dataset"], "test")
    g, h = _load_pair(config, out_dir, config_dir)
    cert_cfg = config["certify"]
    h_s = wrap_smoothed(h, cert_cfg)
    radius_grid = _check_grid(config.get("radius_grid", np.linspace(0, 1, 21)), "radius grid")
    if radius_grid[0] > 0:
        raise ValueError("radius grid must include 0")
    methods = cert_cfg.get("methods", ["lipschitz_global", "rs"])
    alphas = [float(a) for a in cert_cfg.get("alphas", [0.75])]
    estimator = cert_cfg.get("estimator", "mc")

    rows = []
    for method in methods:
        for alpha in alphas:
            mix = MixedClassifier(g=g, h=h_s, alpha=alpha)
            certs = certify_dataset(mix, ds, method, estimator=estimator, workers=workers)
            correct = np.array([c.label == c.y for c in certs])
            certifiable = np.array([c.certifiable for c in certs])
            radii = np.array([c.radius for c in certs])
            mix_clean = _accuracy(mix, ds.X, ds.y)
            at_zero = float(np.mean(correct & certifiable))
            for r in radius_grid:
                frac = float(np.mean(correct & certifiable & (radii >= r)))
                rows.append((method, alpha, r, frac, mix_clean, at_zero))
    path = os.path.join(out_dir, "certified_curve.csv")
    write_csv(
        path,
        (
            "method", "alpha", "radius", "certified_accuracy",
            "mix_clean_accuracy", "certified_fraction_at_zero",
        ),
        rows,
        config,
    )
    paths = [path]
    if config.get("svg"):
        from .render import render_curves

        series = {}
        for method, alpha, r, frac, _, _ in rows:
            series.setdefault(f"{method} a={alpha:g}", ([], []))
            series[f"{method} a={alpha:g}"][0].append(r)
            series[f"{method} a={alpha:g}"][1].append(frac)
        svg = os.path.join(out_dir, "certified_curve.svg")
        render_curves(
            svg, "radius", "certified accuracy",
            [(name, xs, ys) for name, (xs, ys) in series.items()],
        )
        paths.append(svg)
    return paths


SWEEPS = {
    "alpha_sweep": run_alpha_sweep,
    "design_study": run_design_study,
    "confidence_table": run_confidence_table,
    "certified_curve": run_certified_curve,
}


def robust_classifier(config, out_dir, config_dir):
    """The robust base, smoothed when the config asks for it."""
    h = load_base_classifier(resolve_path(config["robust_model"], out_dir, config_dir))
    smoothing = config.get("smoothing")
    if smoothing:
        return wrap_smoothed(h, smoothing)
    return h


def certificates_to_rows(certs: list[Certificate]):
    return [
        (
            c.index, c.label, c.y, c.y_prime, c.margin, c.radius, c.method, c.alpha,
            ";".join(c.flags), "inf" if c.norm == float("inf") else format(c.norm, "g"),
        )
        for c in certs
    ]


def certificates_from_csv(path) -> list[Certificate]:
    header, rows = read_csv(path)
    if list(header) != list(CERTIFICATE_HEADER):
        raise ValueError(f"unexpected certificate header {header}")
    out = []
    for row in rows:
        out.append(
            Certificate(
                index=int(row[0]),
                label=int(row[1]) if row[1] else None,
                y=int(row[2]),
                y_prime=int(row[3]),
                margin=float(row[4]),
                radius=float(row[5]),
                method=row[6],
                alpha=float(row[7]),
                flags=tuple(f for f in row[8].split(";") if f),
                norm=float("inf") if row[9] == "inf" else float(row[9]),
            )
        )
    return out


def run_certify(config, out_dir, workers=1, config_dir=".") -> list[str]:
    ds = build_dataset(config["dataset"], "test")
    g = load_base_classifier(resolve_path(config["standard_model"], out_dir, config_dir))
    h = robust_classifier(config, out_dir, config_dir)
    cert_cfg = config["certify"]
    mix = MixedClassifier(g=g, h=h, alpha=float(cert_cfg.get("alpha", 0.75)))
    certs = certify_dataset(
        mix,
        ds,
        cert_cfg.get("method", "lipschitz_global"),
        norm=cert_cfg.get("norm"),
        estimator=cert_cfg.get("estimator", "mc"),
        local_eps=float(cert_cfg.get("local_eps", 0.25)),
        workers=workers,
    )
    path = os.path.join(out_dir, "certificates.csv")
    write_csv(path, CERTIFICATE_HEADER, certificates_to_rows(certs), config)
    return [path]


def run_verify(config, certificates_path, out_dir, workers=1, config_dir=".") -> list[str]:
    """Exhaustically re-check issued certificates; write one verdict per row."""
    ds = build_dataset(config["dataset"], "test")
    g = load_base_classifier(resolve_path(config["standard_model"], out_dir, config_dir))
    h = robust_classifier(config, out_dir, config_dir)
    certs = certificates_from_csv(certificates_path)
    resolution = int(config.get("verify", {}).get("resolution", 201))

    def one(cert: Certificate):
        h_eval = h
        if isinstance(h, SmoothedClassifier) and "estimator=quadrature" in cert.flags:
            h_eval = wrap_smoothed(h.base, {"sigma": h.sigma, "n_samples": h.n_samples,
                                            "seed": h.seed, "method": "quadrature"})
        mix = MixedClassifier(g=g, h=h_eval, alpha=cert.alpha)
        verdict = verify_certificate(mix, ds.X[cert.index], cert, resolution)
        witness = (
            ";".join(format(v, ".12g") for v in verdict.counterexample)
            if verdict.counterexample is not None
            else ""
        )
        return (
            cert.index, cert.method, cert.radius, verdict.ok,
            verdict.min_margin, verdict.points_checked, witness,
        )

    rows = parallel_map(one, certs, workers)
    path = os.path.join(out_dir, "verdicts.csv")
    write_csv(
        path,
        ("index", "method", "radius", "ok", "min_margin", "points_checked", "counterexample"),
        rows,
        config,
    )
    return [path]


def run_rs_predict(config, out_dir, workers=1, config_dir=".") -> list[str]:
    ds = build_dataset(config["dataset"], "test")
    h = robust_classifier(config, out_dir, config_dir)
    if not isinstance(h, SmoothedClassifier):
        raise ValueError("rs-predict needs a 'smoothing' section in the config")
    chunks = np.array_split(np.arange(len(ds)), max(workers, 1))
    parts = parallel_map(
        lambda idx: smoothed_probs_mc(h, ds.X[idx]) if len(idx) else np.zeros((0, ds.class_count)),
        chunks,
        workers,
    )
    probs = np.vstack(parts)
    preds = np.argmax(probs, axis=1)
    rows = [
        (i, int(ds.y[i]), int(preds[i])) + tuple(float(v) for v in probs[i])
        for i in range(len(ds))
    ]
    header = ("index", "label", "prediction") + tuple(
        f"prob_{k}" for k in range(ds.class_count)
    )
    path = os.path.join(out_dir, "rs_predictions.csv")
    write_csv(path, header, rows, config)
    return [path]


def run_train(config, out_dir, workers=1, config_dir=".") -> list[str]:
    """Train one base model from its recipe and save it under out_dir."""
    from .io import model_spec_from, train_config_from
    from .training import train as train_model
    from .network import save_model

    ds = build_dataset(config["dataset"], "train")
    model = train_model(model_spec_from(config["model"]), ds, train_config_from(config["train"]))
    path = os.path.join(out_dir, config.get("output", "model.model"))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    save_model(model, path)
    return [path]


def run_attack(config, out_dir, workers=1, config_dir=".") -> list[str]:
    """Attack report: perturbations per target, all models scored."""
    from .attacks import evaluate_under_attack

    ds = build_dataset(config["dataset"], "test")
    g = load_base_classifier(resolve_path(config["standard_model"], out_dir, config_dir))
    h = robust_classifier(config, out_dir, config_dir)
    mix = build_mixed(g, h, config.get("mixing", {"alpha": 0.75}))
    targets = config.get("targets", ["STD", "ROB", "MIX"])
    reports = parallel_map(
        lambda t: evaluate_under_attack(g, h, mix, ds, attack_spec_from(config["attack"], t)),
        targets,
        workers,
    )
    detail_rows = [row for report in reports for row in report.rows]
    detail = os.path.join(out_dir, "attack_report.csv")
    write_csv(
        detail,
        ("index", "target", "eps", "clean_pred", "adv_pred", "label", "margin_at_adv"),
        detail_rows,
        config,
    )
    summary_rows = [
        (
            r.spec.target,
            r.clean_accuracy["std"], r.clean_accuracy["rob"], r.clean_accuracy["mix"],
            r.attacked_accuracy["std"], r.attacked_accuracy["rob"], r.attacked_accuracy["mix"],
        )
        for r in reports
    ]
    summary = os.path.join(out_dir, "attack_summary.csv")
    write_csv(
        summary,
        (
            "target", "clean_acc_g", "clean_acc_h", "clean_acc_mix",
            "attacked_acc_g", "attacked_acc_h", "attacked_acc_mix",
        ),
        summary_rows,
        config,
    )
    return [detail, summary]


def run_mix_eval(config, out_dir, workers=1, config_dir=".") -> list[str]:
    ds = build_dataset(config["dataset"], "test")
    g = load_base_classifier(resolve_path(config["standard_model"], out_dir, config_dir))
    h = robust_classifier(config, out_dir, config_dir)
    mix = build_mixed(g, h, config.get("mixing", {"alpha": 0.75}))
    scores = mix.decision_function(ds.X)
    preds = mix.classes_[np.argmax(scores, axis=1)]
    rows = [
        (i, int(ds.y[i]), int(preds[i])) + tuple(float(v) for v in scores[i])
        for i in range(len(ds))
    ]
    header = ("index", "label", "prediction") + tuple(
        f"score_{k}" for k in range(scores.shape[1])
    )
    path = os.path.join(out_dir, "mix_eval.csv")
    write_csv(path, header, rows, config)
    return [path]
