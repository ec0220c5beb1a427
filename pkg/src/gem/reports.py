"""The fit / analyze / simulate / demo workflows behind the command line.

Output layout under ``out``::

    fit/    gemfit.json, summary.csv, validation.txt, er_<term>.csv
    pca/    scores, loadings, explained variance, correlation loadings
    pls/    cv_error, classes, scores, loadings, coefficients, jackknife, shaving
    enet/   enet_path.csv, enet_cv.csv, nonzero.txt
    plots/  one SVG per figure, each with a CSV twin of the same name
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import enet as enet_mod
from .core import GemFit, gem, load_fit, save_fit, variance_summary
from .dataset import Dataset, Schema, load_dataset, save_dataset, validate_dataset
from .design import as_term
from .oracle import SynthSpec, plant_effects, rng
from .pca import correlation_loadings, explained_y, fit_pca
from .pls import (
    TargetCoding,
    cross_validate,
    encode_target,
    fit_pls,
    jackknife,
    majority_class_error,
    shave,
)
from .plotting import bar_plot, component_scatter, fmt, line_plot, scatter_plot, write_csv
from .validation import CvScheme, segments


class UsageError(ValueError):
    """Invalid or incomplete run configuration (exit code 2)."""


@dataclass
class RunConfig:
    data: str | None = None
    responses: str | list | None = None
    id_column: str | None = None
    categorical: list = field(default_factory=list)
    continuous: list = field(default_factory=list)
    model: str | None = None
    fit: str | None = None
    effect: str | None = None
    analysis: str = "pls"
    ncomp: int | None = None
    use_ncomp: int | None = None
    cv: str = "loo"
    alpha: float = 0.5
    family: str | None = None
    nlambda: int = 100
    shave: float | None = None
    jackknife: bool = False
    seed: int = 0
    out: str = "gem_out"
    log: bool = False
    scale: bool = False
    add_intercept: bool = False
    embed_matrices: bool = False
    export_er: bool = False

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        return cls().updated(doc)

    def updated(self, values: dict) -> "RunConfig":
        known = {f.name for f in fields(self)}
        unknown = set(values) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged = asdict(self)
        merged.update({k: v for k, v in values.items() if v is not None})
        return RunConfig(**merged)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @property
    def scheme(self) -> CvScheme:
        try:
            return CvScheme.parse(self.cv, self.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def load_input(cfg: RunConfig) -> Dataset:
    if not cfg.data:
        raise UsageError("--data is required")
    if not cfg.responses:
        raise UsageError("--responses is required")
    schema = Schema(
        responses=cfg.responses,
        id_column=cfg.id_column,
        categorical=tuple(cfg.categorical or ()),
        continuous=tuple(cfg.continuous or ()),
    )
    d = load_dataset(cfg.data, schema)
    if cfg.log:
        if np.any(d.Y <= 0):
            raise ValueError("log transform needs strictly positive responses")
        d = d.with_responses(np.log(d.Y))
    return d


def obtain_fit(cfg: RunConfig) -> tuple[GemFit, Dataset | None]:
    data = load_input(cfg) if cfg.data else None
    if cfg.fit:
        return load_fit(cfg.fit, data), data
    if not cfg.model:
        raise UsageError("--model (or --fit) is required")
    if data is None:
        raise UsageError("--data is required")
    return gem(cfg.model, data), data


def cmd_fit(cfg: RunConfig) -> dict:
    data = load_input(cfg)
    if not cfg.model:
        raise UsageError("--model is required")
    fit = gem(cfg.model, data)
    out = cfg.out_dir / "fit"
    out.mkdir(parents=True, exist_ok=True)
    save_fit(fit, out / "gemfit.json", embed_matrices=cfg.embed_matrices)

    report = validate_dataset(data)
    shares = variance_summary(fit)
    write_csv(out / "summary.csv", ["term", "fraction_of_variance"], shares.items())
    lines = report.lines()
    (out / "validation.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    if cfg.export_er:
        for t in fit.terms:
            er = fit.er(t) + (fit.mu if cfg.add_intercept else 0.0)
            write_csv(out / f"er_{_safe(t.name)}.csv", ["sample_id", *fit.response_names],
                      ([sid, *row] for sid, row in zip(fit.sample_ids, er)))
    return {"fit": fit, "shares": shares, "balanced": report.balanced, "report": report}


def _effect_terms(cfg: RunConfig, fit: GemFit):
    if not cfg.effect:
        raise UsageError("--effect is required")
    names = [s for s in cfg.effect.replace("+", ",").split(",") if s.strip()]
    try:
        return [fit.term(as_term(s.strip())) for s in names]
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None


def effect_target(data: Dataset, terms) -> TargetCoding:
    """Target for a (combination of) effect(s): the joint class labels, or a single covariate."""
    variables = [data.variable(v) for t in terms for v in t.variables]
    variables = list({v.name: v for v in variables}.values())
    if len(variables) == 1:
        return encode_target(variables[0])
    if any(not v.spec.is_categorical for v in variables):
        raise UsageError("combined or interaction targets must be categorical")
    labels = np.array([".".join(parts) for parts in zip(*(v.values for v in variables))])
    return encode_target(labels)


def _prepare_er(cfg: RunConfig, fit: GemFit, terms) -> np.ndarray:
    X = fit.combined_er(terms)
    if cfg.add_intercept:
        X = X + fit.mu
    if cfg.scale:
        sd = X.std(axis=0, ddof=1)
        if np.any(sd == 0):
            raise ValueError("cannot scale constant ER columns")
        X = X / sd
    return X


def cmd_analyze(cfg: RunConfig) -> dict:
    fit, data = obtain_fit(cfg)
    if data is None:
        raise UsageError("--data is required to know the effect's design variable")
    terms = _effect_terms(cfg, fit)
    X = _prepare_er(cfg, fit, terms)
    label = "+".join(t.name for t in terms)
    names = list(fit.response_names or data.response_names)
    ids = list(data.sample_ids)
    if cfg.analysis == "pca":
        return run_pca(cfg, X, label, names, ids, data, terms)
    if cfg.analysis == "pls":
        return run_pls(cfg, X, effect_target(data, terms), label, names, ids)
    if cfg.analysis == "enet":
        return run_enet(cfg, X, effect_target(data, terms), label, names)
    raise UsageError(f"unknown analysis {cfg.analysis!r}")


def _groups(data: Dataset, terms):
    cats = [data.variable(v) for t in terms for v in t.variables if data.variable(v).spec.is_categorical]
    if not cats:
        return None
    return [".".join(parts) for parts in zip(*(v.values for v in cats))]


def run_pca(cfg, X, label, names, ids, data, terms) -> dict:
    n, N = X.shape
    A = min(cfg.ncomp or 2, n - 1, N)
    model = fit_pca(X, A)
    out = cfg.out_dir / "pca"
    plots = cfg.out_dir / "plots"
    pcs = [f"PC{a + 1}" for a in range(A)]
    write_csv(out / "scores.csv", ["sample_id", *pcs], ([i, *r] for i, r in zip(ids, model.T)))
    write_csv(out / "loadings.csv", ["response", *pcs], ([nm, *r] for nm, r in zip(names, model.P)))
    write_csv(out / "explvar.csv", ["component", "explvar_X"], zip(range(1, A + 1), model.explvar_X))
    corr = correlation_loadings(model, X)
    write_csv(out / "correlation_loadings.csv", ["response", *pcs], ([nm, *r] for nm, r in zip(names, corr)))

    ax = [f"PC{k} ({100 * model.explvar_X[k - 1]:.1f}%)" for k in (1, min(2, A))]
    t2 = model.T[:, 1] if A > 1 else np.zeros(n)
    p2 = model.P[:, 1] if A > 1 else np.zeros(N)
    c2 = corr[:, 1] if A > 1 else np.zeros(N)
    scatter_plot(plots / "pca_scores", ids, model.T[:, 0], t2, title=f"Scores ({label})",
                 xlabel=ax[0], ylabel=ax[1], groups=_groups(data, terms))
    scatter_plot(plots / "pca_loadings", names, model.P[:, 0], p2, title=f"Loadings ({label})",
                 xlabel=ax[0], ylabel=ax[1])
    scatter_plot(plots / "pca_corrload", names, corr[:, 0], c2, title="Correlation loadings",
                 xlabel=ax[0], ylabel=ax[1], circles=(math.sqrt(0.5), 1.0))
    bar_plot(plots / "pca_explvar", pcs, 100 * model.explvar_X, title=f"Explained variance ({label})",
             xlabel="component", ylabel="% of ER variance")
    return {"model": model, "correlation_loadings": corr}


def run_pls(cfg, X, target: TargetCoding, label, names, ids) -> dict:
    n, N = X.shape
    scheme = cfg.scheme
    segs = segments(n, scheme, target.labels if target.is_categorical else None)
    amax = min(n - max(len(s) for s in segs) - 1, N)
    A = min(cfg.ncomp or 10, amax)
    if A < 1:
        raise ValueError("too few samples for cross-validated PLS")
    cv = cross_validate(X, target, A, scheme)
    a_use = cfg.use_ncomp or cv.ncomp_selected
    if not 1 <= a_use <= A:
        raise UsageError(f"--use-ncomp must be in 1..{A}")
    model = fit_pls(X, target, A)
    out = cfg.out_dir / "pls"
    plots = cfg.out_dir / "plots"
    comps = [f"comp{a + 1}" for a in range(A)]

    write_csv(out / "cv_error.csv", ["component", "error", "se"], zip(range(1, A + 1), cv.error, cv.se))
    if target.is_categorical:
        write_csv(out / "classes.csv", ["sample_id", "observed", *comps],
                  ([i, obs, *row] for i, obs, row in zip(ids, target.labels, cv.classes)))
    else:
        write_csv(out / "predictions.csv", ["sample_id", "observed", *comps],
                  ([i, obs, *row] for i, obs, row in zip(ids, target.values, cv.pred)))
    write_csv(out / "scores.csv", ["sample_id", *comps], ([i, *r] for i, r in zip(ids, model.T)))
    write_csv(out / "loadings.csv", ["response", *comps], ([nm, *r] for nm, r in zip(names, model.P)))
    write_csv(out / "loading_weights.csv", ["response", *comps], ([nm, *r] for nm, r in zip(names, model.W)))
    B = model.B if model.B.ndim == 2 else model.B[:, :, 0]
    write_csv(out / "coefficients.csv", ["response", *comps], ([nm, *r] for nm, r in zip(names, B.T)))
    corr = correlation_loadings(model, X)
    write_csv(out / "correlation_loadings.csv", ["response", *comps], ([nm, *r] for nm, r in zip(names, corr)))

    summary = {"effect": label, "ncomp": A, "ncomp_selected": cv.ncomp_selected, "ncomp_used": a_use,
               "cv": str(scheme), "cv_error_used": float(cv.error[a_use - 1])}
    mce = majority_class_error(target) if target.is_categorical else None
    if mce is not None:
        summary["majority_class_error"] = mce

    signif = np.zeros(N, dtype=bool)
    if cfg.jackknife:
        p = jackknife(X, target, A, scheme, cv=cv)
        p1 = p if p.ndim == 2 else p.min(axis=2)
        write_csv(out / "jackknife.csv", ["response", *comps], ([nm, *r] for nm, r in zip(names, p1)))
        signif = p1[:, a_use - 1] < 0.05
        summary["n_significant"] = int(signif.sum())

    xl = f"Comp 1 ({100 * model.explvar_X[0]:.1f}%)"
    yl = "Comp 2" if A > 1 else "(none)"
    t2 = model.T[:, 1] if A > 1 else np.zeros(n)
    scatter_plot(plots / "pls_scores", ids, model.T[:, 0], t2, title=f"Scores ({label})", xlabel=xl,
                 ylabel=yl, groups=list(target.labels) if target.is_categorical else None)
    scatter_plot(plots / "pls_loadings", names, model.P[:, 0], model.P[:, 1] if A > 1 else np.zeros(N),
                 title=f"Loadings ({label})", xlabel=xl, ylabel=yl, emphasize=signif)
    scatter_plot(plots / "pls_corrload", names, corr[:, 0], corr[:, 1] if A > 1 else np.zeros(N),
                 title="Correlation loadings", xlabel=xl, ylabel=yl, emphasize=signif,
                 circles=(math.sqrt(0.5), 1.0), axes_lines=True)
    ylab = "% error" if target.is_categorical else "RMSEP"
    scale = 100.0 if target.is_categorical else 1.0
    line_plot(plots / "pls_cv_error", np.arange(1, A + 1), {"CV error": scale * cv.error},
              errors={"CV error": scale * cv.se}, title=f"Cross-validated error ({label})",
              xlabel="number of components", ylabel=ylab,
              hline=("Majority class error", scale * mce) if mce is not None else None)

    result = {"model": model, "cv": cv, "signif": signif, "summary": summary, "correlation_loadings": corr}
    if cfg.shave is not None:
        sh = shave(X, target, a_use, cfg.shave, scheme)
        write_csv(out / "shave_trace.csv", ["step", "n_active", "error"],
                  ((k, len(s.variables), s.error) for k, s in enumerate(sh.trace)))
        (out / "subset.txt").write_text("".join(f"{names[j]}\n" for j in sh.optimal_subset), encoding="utf-8")
        line_plot(plots / "pls_shaving", sh.n_active, {"error": sh.errors}, title="Shaving",
                  xlabel="number of remaining variables", ylabel="error" if mce is not None else "RMSEP",
                  hline=("Majority class error", mce) if mce is not None else None)
        summary.update(min_red=sh.min_red, n_optimal=len(sh.optimal_subset))
        result["shave"] = sh
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return result


def run_enet(cfg, X, target: TargetCoding, label, names) -> dict:
    family = cfg.family or (enet_mod.GAUSSIAN if target.kind == "continuous" else enet_mod.BINOMIAL)
    if family == enet_mod.BINOMIAL:
        if target.kind != "two-class":
            raise UsageError("binomial elastic net needs a two-class effect")
        y, levels = target.labels, target.levels
    else:
        if target.kind != "continuous":
            raise UsageError("gaussian elastic net needs a continuous effect")
        y, levels = target.values, None
    path = enet_mod.cv_enet(X, y, cfg.alpha, family, cfg.scheme, cfg.nlambda, names=names, levels=levels)
    out = cfg.out_dir / "enet"
    plots = cfg.out_dir / "plots"
    loglam = np.log(path.lambdas)
    write_csv(out / "enet_path.csv", ["lambda", "df", "intercept", *names],
              ([lam, df, b0, *b] for lam, df, b0, b in zip(path.lambdas, path.df, path.intercepts, path.coefs)))
    write_csv(out / "enet_cv.csv", ["lambda", "error", "se"], zip(path.lambdas, path.cv_error, path.cv_se))
    nz = enet_mod.nonzero_set(path)
    k = path.opt_index
    (out / "nonzero.txt").write_text("".join(f"{nm}\t{fmt(path.coefs[k, j])}\n" for j, nm in nz), encoding="utf-8")

    series = {nm: path.coefs[:, j] for j, nm in enumerate(names) if np.any(path.coefs[:, j] != 0)}
    if not series:
        series = {"(all zero)": np.zeros(len(loglam))}
    line_plot(plots / "enet_path", loglam, series, title=f"Coefficient paths ({label})",
              xlabel="log(lambda)", ylabel="coefficient", markers=False, legend=len(series) <= 12,
              vline=("lambda_opt", float(loglam[k])))
    ylab = "misclassification error" if family == enet_mod.BINOMIAL else "mean squared error"
    line_plot(plots / "enet_cv", loglam, {"CV error": path.cv_error}, errors={"CV error": path.cv_se},
              title=f"Cross-validated error ({label})", xlabel="log(lambda)", ylabel=ylab,
              vline=("lambda_opt", float(loglam[k])))
    summary = {"effect": label, "alpha": cfg.alpha, "family": family, "cv": str(cfg.scheme),
               "lambda_opt": path.lambda_opt, "n_nonzero": len(nz), "cv_error_opt": float(path.cv_error[k])}
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return {"path": path, "nonzero": nz, "summary": summary}


def pca_vs_pls_toy(n: int = 100, seed: int = 2, isotropic: bool = False):
    """Seeded 2-d predictor cloud and a response that is not aligned with its main axis."""
    g = rng(seed)
    Z = g.standard_normal((n, 2))
    if isotropic:
        # whiten so the sample covariance is exactly the identity
        Z = Z - Z.mean(axis=0)
        L = np.linalg.cholesky(Z.T @ Z / (n - 1))
        X = np.linalg.solve(L, Z.T).T
        y = X @ np.array([0.6, 0.8]) + 0.3 * g.standard_normal(n)
    else:
        X = Z @ np.array([[2.0, 0.9], [0.0, 0.8]])
        y = X @ np.array([-0.4, 1.0]) + 0.3 * g.standard_normal(n)
    return X, y


def pca_vs_pls(X, y) -> dict:
    pca = fit_pca(X, 2)
    pls = fit_pls(X, y, 2)
    return {
        "PCA": {"explvar_X": float(pca.explvar_X[0]), "explvar_y": float(explained_y(pca.T, y)[0]),
                "axes": pca.P},
        "PLS": {"explvar_X": float(pls.explvar_X[0]), "explvar_y": float(pls.explvar_y[0]), "axes": pls.W},
    }


def cmd_demo_pca_vs_pls(cfg: RunConfig, isotropic: bool = False) -> dict:
    X, y = pca_vs_pls_toy(seed=cfg.seed, isotropic=isotropic)
    res = pca_vs_pls(X, y)
    out = cfg.out_dir / "demo"
    write_csv(out / "pca_vs_pls.csv", ["method", "explvar_X_comp1", "explvar_y_comp1"],
              ((m, r["explvar_X"], r["explvar_y"]) for m, r in res.items()))
    component_scatter(cfg.out_dir / "plots" / "pca_vs_pls", X, y,
                      {f"{m} (X {100 * r['explvar_X']:.0f}%, y {100 * r['explvar_y']:.0f}%)": r["axes"]
                       for m, r in res.items()},
                      title="PCA and PLS components")
    return res


def cmd_simulate(spec_path, out_path) -> SynthSpec:
    try:
        doc = json.loads(Path(spec_path).read_text(encoding="utf-8"))
        spec = SynthSpec.from_dict(doc)
        synth = plant_effects(spec)
    except (OSError, json.JSONDecodeError, TypeError, KeyError, ValueError) as exc:
        raise UsageError(f"invalid simulation spec: {exc}") from None
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(synth.data, out_path)
    sidecar = {
        "spec": spec.to_dict(),
        "supports": synth.supports,
        "truth": {term: [[float(x) for x in row] for row in E] for term, E in synth.truth.items()},
    }
    out_path.with_suffix(".truth.json").write_text(json.dumps(sidecar, indent=1) + "\n", encoding="utf-8")
    return spec
