#!/usr/bin/env python3
"""
Тесты сэмплеров, диагностики цепочек, GLM, предсказательных распределений и WAIC/DIC
"""
import math
import sys
import traceback

import numpy as np
from scipy import signal, stats
from scipy.special import expit, gammaln

from src.config.settings import APP_VERSION, load_config
from src.distributions.families import Beta, Exponential, Gauss
from src.distributions.rng import Rng
from src.inference.conjugate import (
    conditional_conjugate_target, gauss_joint_conditional_conjugate, sufficient_stats,
)
from src.inference.evidence import (
    DicResult, PointwiseLogLik, compare_models, dic, pointwise_log_lik, waic,
)
from src.mcmc.diagnostics import autocorr, ess, hpd_interval, mcse, rhat, summarize
from src.mcmc.samplers import hamiltonian, leapfrog, run, run_gibbs, run_hmc, run_mh
from src.mcmc.targets import HMC, MH, ChainSet, Gibbs, LogTarget, SamplerConfig
from src.models.glm import (
    CompiledModel, Standardization, anova_recenter, compile, destandardize, destandardize_draws,
    standardize,
)
from src.models.predictive import (
    PredictiveSample, posterior_predictive, posterior_predictive_conjugate, predictive_check_report,
    prior_predictive, prior_predictive_model,
)
from src.models.spec import DesignMatrix, FlatPrior, LinkFunction, apply_inverse_link, parse_model_spec
from src.utils.errors import (
    DimensionError, DomainError, ImproperPriorError, MissingConditionalError, ParameterError, SpecError,
)


def close(a, b, tol=1e-6):
    return abs(a - b) <= tol * max(1.0, abs(b))


def gauss_target() -> LogTarget:
    return LogTarget(
        dimension=1,
        param_names=("x",),
        log_density=lambda t: -0.5 * float(t[0]) ** 2,
        gradient=lambda t: -np.asarray(t, dtype=float),
    )


def chain_set(*chains, names=("x",), n_free=None) -> ChainSet:
    arrays = [np.asarray(c, dtype=float).reshape(len(c), -1) for c in chains]
    return ChainSet(
        chains=arrays,
        param_names=names,
        warmup_used=0,
        thin=1,
        seeds=[],
        acceptance_rate=[],
        n_free=len(names) if n_free is None else n_free,
    )


def same_chains(a: ChainSet, b: ChainSet) -> bool:
    return a.param_names == b.param_names and all(np.array_equal(x, y) for x, y in zip(a.chains, b.chains))


def linear_data(n=50, seed=7):
    gen = np.random.default_rng(seed)
    x = gen.uniform(0.0, 10.0, n)
    y = 1.0 + 2.0 * x + gen.normal(0.0, 0.5, n)
    return x, y


def numeric_gradient(f, theta, h=1e-6):
    theta = np.asarray(theta, dtype=float)
    out = np.empty_like(theta)
    for j in range(theta.size):
        step = np.zeros_like(theta)
        step[j] = h
        out[j] = (f(theta + step) - f(theta - step)) / (2.0 * h)
    return out


# --- сэмплеры ---

def test_mh_standard_gauss_mean():
    cfg = SamplerConfig(n_chains=4, n_iter=20000, n_warmup=5000, algorithm=MH(2.4), seed=11)
    chains = run_mh(gauss_target(), cfg)
    assert chains.n_chains == 4 and chains.n_draws == 15000
    mean = float(chains.pooled("x").mean())
    assert abs(mean) <= 3.0 * mcse(chains, "x")
    assert all(0.2 < a < 0.6 for a in chains.acceptance_rate)


def test_mh_flat_target_always_accepts():
    flat = LogTarget(dimension=3, param_names=("a", "b", "c"), log_density=lambda t: 0.0)
    chains = run_mh(flat, SamplerConfig(n_chains=2, n_iter=500, n_warmup=100, algorithm=MH(0.5), seed=3))
    assert chains.acceptance_rate == [1.0, 1.0]


def test_mh_same_seed_is_deterministic():
    cfg = SamplerConfig(n_chains=3, n_iter=800, n_warmup=200, thin=2, algorithm=MH(1.0), seed=2024)
    a = run(gauss_target(), cfg)
    b = run(gauss_target(), cfg)
    assert same_chains(a, b)
    assert a.seeds == b.seeds and a.seed == 2024
    c = run(gauss_target(), SamplerConfig(n_chains=3, n_iter=800, n_warmup=200, thin=2, algorithm=MH(1.0), seed=2025))
    assert not same_chains(a, c)


def test_thinning_and_warmup_bookkeeping():
    cfg = SamplerConfig(n_chains=2, n_iter=1000, n_warmup=400, thin=3, algorithm=MH(1.0), seed=5)
    chains = run(gauss_target(), cfg)
    assert chains.n_draws == cfg.n_kept == 200
    assert chains.warmup_used == 400 and chains.thin == 3


def test_sampler_config_rejects_bad_values():
    for kwargs in ({"n_chains": 0}, {"thin": 0}, {"n_iter": 100, "n_warmup": 100}, {"n_iter": 10, "n_warmup": 8, "thin": 5}):
        try:
            SamplerConfig(**kwargs)
            assert False, kwargs
        except ParameterError:
            pass
    try:
        HMC(step_size=0.1, n_leapfrog=0)
        assert False
    except ParameterError:
        pass


def test_sampler_config_from_settings_overrides():
    cfg = SamplerConfig.from_settings({"algorithm": "mh", "n_chains": 4, "step_scale": 0.2}, n_chains=2, algorithm="hmc")
    assert cfg.n_chains == 2 and isinstance(cfg.algorithm, HMC)
    cfg = SamplerConfig.from_settings({"algorithm": "gibbs"}, seed=None)
    assert isinstance(cfg.algorithm, Gibbs) and cfg.seed is None


def test_gibbs_conjugate_mean():
    target = conditional_conjugate_target(0.0, 1.0, 1.0, [1.0, 2.0, 3.0])
    chains = run_gibbs(target, SamplerConfig(n_chains=4, n_iter=6000, n_warmup=1000, algorithm=Gibbs(), seed=17))
    mu_n = gauss_joint_conditional_conjugate(0.0, 1.0, 1.0, sufficient_stats([1.0, 2.0, 3.0])).joint.mu_n
    assert close(mu_n, 1.5, 1e-12)
    assert abs(float(chains.pooled("mu").mean()) - mu_n) <= 3.0 * mcse(chains, "mu")
    assert chains.acceptance_rate == [1.0] * 4
    assert "sigma2" in chains.param_names and chains.n_free == 2


def test_gibbs_one_dimensional_is_exact():
    target = LogTarget(
        dimension=1,
        param_names=("x",),
        log_density=lambda t: -0.5 * float(t[0]) ** 2,
        full_conditionals=(lambda theta, gen: gen.normal(),),
    )
    chains = run_gibbs(target, SamplerConfig(n_chains=1, n_iter=10001, n_warmup=1, algorithm=Gibbs(), seed=8))
    draws = chains.pooled("x")
    assert abs(draws.mean()) < 4.0 / math.sqrt(draws.size)
    assert ess(chains, "x") > 8000
    again = run_gibbs(target, SamplerConfig(n_chains=1, n_iter=10001, n_warmup=1, algorithm=Gibbs(), seed=8))
    assert same_chains(chains, again)


def test_gibbs_requires_conditionals():
    try:
        run_gibbs(gauss_target(), SamplerConfig(n_chains=1, n_iter=10, n_warmup=1, algorithm=Gibbs()))
        assert False
    except MissingConditionalError:
        pass


def test_hmc_standard_gauss_diagnostics():
    cfg = SamplerConfig(n_chains=4, n_iter=6000, n_warmup=1000, algorithm=HMC(0.1, 20), seed=21)
    chains = run_hmc(gauss_target(), cfg)
    assert rhat(chains, "x") < 1.01
    assert ess(chains, "x") > 1000
    assert sum(chains.divergences) == 0


def test_hmc_conjugate_mean():
    target = conditional_conjugate_target(0.0, 1.0, 1.0, [1.0, 2.0, 3.0])
    chains = run(target, SamplerConfig(n_chains=4, n_iter=4000, n_warmup=1000, algorithm=HMC(0.1, 15), seed=9))
    assert abs(float(chains.pooled("mu").mean()) - 1.5) <= 3.0 * mcse(chains, "mu")


def test_hmc_tiny_step_accepts_everything():
    chains = run_hmc(gauss_target(), SamplerConfig(n_chains=2, n_iter=600, n_warmup=100, algorithm=HMC(1e-4, 1), seed=4))
    assert min(chains.acceptance_rate) > 0.999


def test_hmc_requires_gradient():
    no_grad = LogTarget(dimension=1, param_names=("x",), log_density=lambda t: -0.5 * float(t[0]) ** 2)
    try:
        run_hmc(no_grad, SamplerConfig(n_chains=1, n_iter=10, n_warmup=1, algorithm=HMC()))
        assert False
    except ParameterError:
        pass


def test_leapfrog_conserves_energy():
    q0, p0 = np.array([1.0, -0.5]), np.array([0.3, 0.8])
    grad = lambda q: -q
    q1, p1 = leapfrog(q0, p0, grad, 0.01, 100)
    h0 = hamiltonian(-0.5 * float(q0 @ q0), p0)
    h1 = hamiltonian(-0.5 * float(q1 @ q1), p1)
    assert abs(h1 - h0) < 1e-4
    # обратимость: разворот импульса возвращает в исходную точку
    q2, p2 = leapfrog(q1, -p1, grad, 0.01, 100)
    assert np.allclose(q2, q0, atol=1e-10) and np.allclose(-p2, p0, atol=1e-10)


def test_explicit_inits_are_used():
    cfg = SamplerConfig(n_chains=2, n_iter=2, n_warmup=1, algorithm=MH(1e-12), seed=1, inits=[[5.0], [-5.0]])
    chains = run_mh(gauss_target(), cfg)
    assert close(chains.chains[0][0, 0], 5.0, 1e-6) and close(chains.chains[1][0, 0], -5.0, 1e-6)


# --- диагностика ---

def test_rhat_iid_and_separated_chains():
    gen = np.random.default_rng(1)
    iid = chain_set(gen.standard_normal(10000), gen.standard_normal(10000))
    assert abs(rhat(iid, "x") - 1.0) < 0.01
    apart = chain_set(gen.standard_normal(1000), 10.0 + gen.standard_normal(1000))
    assert rhat(apart, "x") > 1.1


def test_rhat_on_copies_of_one_sequence():
    # расщепление даёт четыре одинаковые половины: B = 0, R-hat = sqrt((half-1)/half)
    half = np.random.default_rng(3).standard_normal(500)
    seq = np.concatenate([half, half])
    value = rhat(chain_set(seq, seq.copy()), "x")
    assert close(value, math.sqrt(499 / 500), 1e-12)
    assert value < 1.0
    # при разных половинах копии уже не дают нулевую межцепочечную дисперсию
    seq = np.concatenate([half, half + 0.5])
    assert rhat(chain_set(seq, seq.copy()), "x") > 1.0


def test_rhat_needs_two_chains():
    try:
        rhat(chain_set(np.random.default_rng(0).standard_normal(100)), "x")
        assert False
    except ParameterError:
        pass


def test_ess_examples():
    gen = np.random.default_rng(2)
    iid = chain_set(gen.standard_normal(10000))
    assert 8000 <= ess(iid, "x") <= 10000
    alternating = chain_set(np.tile([1.0, -1.0], 5000))
    assert close(ess(alternating, "x"), 10000.0, 1e-12)
    ar = signal.lfilter([1.0], [1.0, -0.9], gen.standard_normal(100000))
    expected = 100000 * (1 - 0.9) / (1 + 0.9)
    assert abs(ess(chain_set(ar), "x") - expected) <= 0.15 * expected


def test_autocorr_examples():
    gen = np.random.default_rng(3)
    n = 100000
    rho = autocorr(gen.standard_normal(n), 5)
    assert rho[0] == 1.0
    assert np.all(np.abs(rho[1:]) < 4.0 / math.sqrt(n))
    ar = signal.lfilter([1.0], [1.0, -0.5], gen.standard_normal(n))
    rho = autocorr(ar, 4)
    for k in range(1, 5):
        assert abs(rho[k] - 0.5 ** k) < 5.0 / math.sqrt(n)
    try:
        autocorr(np.arange(10.0), 5)
        assert False
    except ParameterError:
        pass


def test_hpd_examples():
    gen = np.random.default_rng(4)
    low, high = hpd_interval(gen.standard_normal(1000000), 0.95)
    assert abs(low + 1.96) < 0.02 and abs(high - 1.96) < 0.02
    assert hpd_interval(np.full(500, 3.25), 0.9) == (3.25, 3.25)
    draws = gen.exponential(1.0, 100000)
    low, high = hpd_interval(draws, 0.95)
    central = np.quantile(draws, [0.025, 0.975])
    assert low < 0.01
    assert high - low < central[1] - central[0]
    try:
        hpd_interval(np.arange(50.0), 0.95)
        assert False
    except ParameterError:
        pass


def test_summarize_flags_short_chains():
    gen = np.random.default_rng(5)
    chains = chain_set(gen.standard_normal(200), gen.standard_normal(200))
    summary = summarize(chains, hpd_mass=0.9, ess_warn=1000)["x"]
    assert summary.ess is not None and summary.ess < 1000
    assert any(w.startswith("ess") for w in summary.warnings)
    assert set(summary.to_dict()) >= {"mean", "sd", "quantiles", "hpd", "ess", "rhat", "mcse"}
    assert summary.hpd[0] < summary.quantiles["0.5"] < summary.hpd[1]


# --- GLM ---

def test_standardize_examples():
    X = DesignMatrix.from_columns(np.array([10.0, 20.0, 30.0, 40.0]), ("x",))
    zy, zX, meta = standardize([1.0, 2.0, 4.0, 5.0], X)
    expected = [-1.1619, -0.3873, 0.3873, 1.1619]
    assert np.allclose(zX.predictors[:, 0], expected, atol=1e-4)
    assert np.all(zX.values[:, 0] == 1.0)
    assert meta.x_flags == (True,) and meta.y_standardized
    zy, _, _ = standardize([1.0, 2.0, 3.0], DesignMatrix.from_columns(np.array([0.0, 1.0, 2.0]), ("x",)))
    assert np.allclose(zy, [-1.0, 0.0, 1.0])


def test_standardize_keeps_indicator_columns():
    X = DesignMatrix.from_columns(np.array([0.0, 1.0, 1.0, 0.0]), ("flag",))
    _, zX, meta = standardize([0.0, 1.0, 1.0, 0.0], X, metric=False)
    assert np.array_equal(zX.values, X.values)
    assert meta.x_flags == (False,) and not meta.y_standardized


def test_destandardize_examples():
    identity = Standardization.identity(("x",))
    assert np.allclose(destandardize(identity, [0.3, -1.2]), [0.3, -1.2])
    linear = Standardization(("x",), [0.0], [2.0], (True,), y_mean=0.0, y_sd=4.0, y_standardized=True)
    assert close(destandardize(linear, [0.0, 0.5])[1], 1.0, 1e-12)
    logistic = Standardization(("x",), [0.0], [2.0], (True,))
    assert close(destandardize(logistic, [0.0, 0.5])[1], 0.25, 1e-12)


def test_destandardize_recovers_raw_coefficients():
    x, y = linear_data()
    X = DesignMatrix.from_columns(x, ("x",))
    zy, zX, meta = standardize(y, X)
    assert meta.has_sigma
    zb = np.linalg.lstsq(zX.values, zy, rcond=None)[0]
    b = np.linalg.lstsq(X.values, y, rcond=None)[0]
    z_sigma = float(np.std(zy - zX.values @ zb, ddof=2))
    raw = destandardize(meta, [*zb, z_sigma])
    assert np.allclose(raw[:2], b, atol=1e-9)
    assert close(raw[2], float(np.std(y - X.values @ b, ddof=2)), 1e-9)
    assert close(raw[2], z_sigma * meta.y_sd, 1e-12)


def test_destandardize_then_standardize_reproduces_predictions():
    x, y = linear_data(30, seed=3)
    X = DesignMatrix.from_columns(x, ("x",))
    _, zX, meta = standardize(y, X)
    gen = np.random.default_rng(4)
    for _ in range(20):
        zb = gen.normal(0.0, 1.0, 2)
        raw = destandardize(meta, [*zb, 1.0])
        z_pred = zX.values @ zb
        assert np.allclose(meta.transform_y(X.values @ raw[:2]), z_pred, rtol=1e-12, atol=1e-12)
        assert np.allclose(X.values @ raw[:2], meta.inverse_y(z_pred), rtol=1e-12, atol=1e-12)


def test_anova_recenter_examples():
    a = anova_recenter(1.0, [1.0, -1.0])
    assert close(a.a0, 1.0) and np.allclose(a.a, [1.0, -1.0])
    a = anova_recenter(2.5, [0.0, 0.0, 0.0])
    assert close(a.a0, 2.5) and np.allclose(a.a, 0.0)
    a = anova_recenter(0.0, [2.0, 4.0, 6.0])
    assert close(a.a0, 4.0) and np.allclose(a.a, [-2.0, 0.0, 2.0])
    assert abs(a.a.sum()) < 1e-12


def test_inverse_link_examples():
    assert apply_inverse_link(LinkFunction.LOGISTIC, 0.0) == 0.5
    assert apply_inverse_link(LinkFunction.NATURAL_EXP, 0.0) == 1.0
    assert apply_inverse_link(LinkFunction.NEGATIVE_INVERSE, -2.0) == 0.5
    assert apply_inverse_link("identity", 3.0) == 3.0
    try:
        apply_inverse_link(LinkFunction.NEGATIVE_INVERSE, 0.5)
        assert False
    except DomainError:
        pass


def test_compile_poisson_zero_coefficients():
    spec = parse_model_spec({"likelihood": "poisson", "response": "y", "predictors": ["x"]})
    y = np.array([0.0, 1.0, 3.0, 2.0, 5.0])
    X = DesignMatrix.from_columns(np.array([0.5, 1.0, 1.5, 2.0, 2.5]), ("x",))
    target = compile(spec, y, X)
    assert target.param_names == ("zb0", "zb[x]")
    expected = float(np.sum(-1.0 - gammaln(y + 1.0)))
    assert close(target.log_likelihood(np.zeros(2)), expected, 1e-12)
    assert np.allclose(target.pointwise_log_lik(np.zeros(2)), -1.0 - gammaln(y + 1.0))


def test_compile_logistic_zero_coefficients():
    spec = parse_model_spec({"likelihood": "bernoulli", "response": "y", "predictors": ["x"]})
    y = np.array([0.0, 1.0, 1.0, 0.0, 1.0, 0.0])
    X = DesignMatrix.from_columns(np.arange(6.0), ("x",))
    target = compile(spec, y, X)
    assert close(target.log_likelihood(np.zeros(2)), 6 * math.log(0.5), 1e-12)


def test_compile_rejects_bad_inputs():
    try:
        parse_model_spec({"likelihood": "weibull", "response": "y"})
        assert False
    except SpecError as e:
        assert e.field == "likelihood"
    try:
        parse_model_spec({"likelihood": "gauss", "response": "y", "link": "logistic"})
        assert False
    except SpecError as e:
        assert e.field == "link"
    spec = parse_model_spec({"likelihood": "poisson", "response": "y", "predictors": ["x"]})
    X = DesignMatrix.from_columns(np.arange(3.0), ("x",))
    try:
        compile(spec, [1.0, -1.0, 2.0], X)
        assert False
    except DomainError:
        pass
    try:
        compile(spec, [1.0, 2.0], X)
        assert False
    except DimensionError:
        pass


def gradient_cases(gen):
    """(имя, описание модели, y, X, именованные аргументы compile) для каждого семейства."""
    n = 30
    x = gen.uniform(-1.0, 1.0, n)
    x_pos = gen.uniform(0.0, 1.0, n)
    groups = [f"g{i % 3}" for i in range(n)]
    X = DesignMatrix.from_columns(x, ("x",))
    no_x = DesignMatrix.from_columns(np.empty((n, 0)), ())
    trials = gen.integers(1, 8, n).astype(float)
    exposure = gen.uniform(0.5, 2.0, n)

    def model(likelihood, **extra):
        return {"likelihood": likelihood, "response": "y", "predictors": ["x"], **extra}

    return [
        ("gauss", model("gauss"), 1.0 + x + gen.normal(0, 0.3, n), X, {}),
        ("student_t", model("student_t"), x + gen.standard_t(4, n), X, {}),
        ("bernoulli", model("bernoulli"), gen.integers(0, 2, n).astype(float), X, {}),
        ("binomial", model({"family": "binomial", "trials": "n"}), gen.binomial(trials.astype(int), 0.4).astype(float), X,
         {"trials": trials}),
        ("poisson", model("poisson"), gen.poisson(2.0, n).astype(float), X, {}),
        ("poisson+exposure", model({"family": "poisson", "exposure": "e"}), gen.poisson(2.0, n).astype(float), X,
         {"exposure": exposure}),
        ("negative_binomial", model("negative_binomial"), gen.poisson(3.0, n).astype(float), X, {}),
        ("exponential", model("exponential"), gen.exponential(1.5, n), DesignMatrix.from_columns(x_pos, ("x",)), {}),
        ("gauss/group", model("gauss", group="g"), 1.0 + x + gen.normal(0, 0.5, n), X, {"groups": groups}),
        ("student_t/group", model("student_t", group="g"), x + gen.standard_t(4, n), X, {"groups": groups}),
        ("bernoulli/group", model("bernoulli", group="g"), gen.integers(0, 2, n).astype(float), X, {"groups": groups}),
        ("poisson/group", model("poisson", group="g"), gen.poisson(2.0, n).astype(float), X, {"groups": groups}),
        ("negative_binomial/group", model("negative_binomial", group="g"), gen.poisson(3.0, n).astype(float), X,
         {"groups": groups}),
        ("anova", {"likelihood": "anova", "response": "y", "group": "g"}, gen.normal(0.0, 1.0, n), no_x,
         {"groups": groups}),
        ("anova/hetero", {"likelihood": {"family": "anova", "heteroscedastic": True}, "response": "y", "group": "g"},
         gen.normal(0.0, 1.0, n), no_x, {"groups": groups}),
    ]


def test_gradient_matches_finite_differences():
    gen = np.random.default_rng(6)
    for name, obj, y, X, extra in gradient_cases(gen):
        target = compile(parse_model_spec(obj), y, X, **extra)
        assert target.gradient is not None, name
        for _ in range(50):
            if name == "exponential":
                # усечённые априорные и отрицательная линейная форма
                theta = -gen.uniform(0.2, 1.0, target.dimension)
            else:
                theta = gen.uniform(-0.5, 0.5, target.dimension)
            analytic = target.gradient(theta)
            numeric = numeric_gradient(target.log_density, theta)
            error = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
            assert np.max(error) < 1e-5, (name, analytic, numeric)


def test_hierarchical_layout():
    spec = parse_model_spec({"likelihood": "gauss", "response": "y", "predictors": ["x"], "group": "g"})
    gen = np.random.default_rng(9)
    x = gen.normal(size=12)
    target = compile(spec, x + gen.normal(size=12), DesignMatrix.from_columns(x, ("x",)), groups=["a", "b", "c"] * 4)
    names = target.param_names
    assert "zb[x]" in names and "log_omega" in names and "log_sigma" in names
    assert [n for n in names if n.startswith("zb0[")] == ["zb0[a]", "zb0[b]", "zb0[c]"]
    assert target.full_conditionals is None
    assert target.model.n_groups == 3


def test_compiled_model_serialization_keeps_layout():
    x, y = linear_data(20)
    spec = parse_model_spec({"likelihood": "gauss", "response": "y", "predictors": ["x"]})
    model = compile(spec, y, DesignMatrix.from_columns(x, ("x",))).model
    restored = CompiledModel.from_dict(model.to_dict())
    assert restored.layout.names == model.layout.names
    assert restored.layout.derived == model.layout.derived
    assert np.allclose(restored.meta.x_sd, model.meta.x_sd)


def test_linear_regression_gibbs_matches_least_squares():
    x, y = linear_data(60)
    X = DesignMatrix.from_columns(x, ("x",))
    spec = parse_model_spec({"likelihood": "gauss", "response": "y", "predictors": ["x"]})
    target = compile(spec, y, X)
    assert target.full_conditionals is not None
    chains = run(target, SamplerConfig(n_chains=2, n_iter=2500, n_warmup=500, algorithm=Gibbs(), seed=12))
    raw = destandardize_draws(target.model, chains)
    assert list(raw.columns[:2]) == ["chain", "iteration"]
    slope, intercept = np.polyfit(x, y, 1)
    assert abs(raw["b[x]"].mean() - slope) < 0.05
    assert abs(raw["b0"].mean() - intercept) < 0.3
    assert raw["sigma"].min() > 0.0


def test_anova_fit_cell_effects_sum_to_zero():
    gen = np.random.default_rng(13)
    groups = ["a"] * 15 + ["b"] * 15 + ["c"] * 15
    y = np.concatenate([gen.normal(m, 1.0, 15) for m in (0.0, 2.0, 4.0)])
    spec = parse_model_spec({"likelihood": "anova", "response": "y", "group": "g"})
    target = compile(spec, y, DesignMatrix.from_columns(np.empty((45, 0)), ()), groups=groups)
    chains = run(target, SamplerConfig(n_chains=2, n_iter=2000, n_warmup=500, algorithm=Gibbs(), seed=2))
    raw = destandardize_draws(target.model, chains)
    effects = raw[["a[a]", "a[b]", "a[c]"]].to_numpy()
    assert np.allclose(effects.sum(axis=1), 0.0, atol=1e-9)
    assert raw["mu[c]"].mean() > raw["mu[b]"].mean() > raw["mu[a]"].mean()


def test_hierarchical_intercepts_shrink_toward_grand_mean():
    gen = np.random.default_rng(41)
    labels = ("a", "b", "c", "d", "e")
    means = (-1.0, -1.2, -0.8, 1.5, 1.5)
    y, groups = [], []
    for label, m in zip(labels, means):
        noise = gen.normal(0.0, 3.0, 8)
        y.append(m + noise - noise.mean())
        groups += [label] * 8
    y = np.concatenate(y)
    grand = float(np.mean(means))
    spec = parse_model_spec({"likelihood": "gauss", "response": "y", "group": "g"})
    target = compile(spec, y, DesignMatrix.from_columns(np.empty((40, 0)), ()), groups=groups)
    chains = run(target, SamplerConfig(n_chains=2, n_iter=20000, n_warmup=5000, algorithm=MH(0.15), seed=42))
    raw = destandardize_draws(target.model, chains)
    for label, m in zip(labels, means):
        post = float(raw[f"b0[{label}]"].mean())
        # сдвиг от выборочного среднего группы в сторону общего среднего
        assert (post - m) * (grand - m) > 0.0, (label, post, m)
        assert abs(post - grand) < abs(m - grand), (label, post, m)


def recovery_coverage(obj, truth, simulate, algorithm, n_iter=2000, n_warmup=500, replicates=20):
    """(накрыто, всего) для 95% HPD-интервалов по повторным наборам данных n = 200."""
    spec = parse_model_spec(obj)
    covered = total = 0
    for rep in range(replicates):
        gen = np.random.default_rng(1000 + rep)
        x, y = simulate(gen, 200)
        target = compile(spec, y, DesignMatrix.from_columns(x, ("x",)))
        chains = run(target, SamplerConfig(n_chains=2, n_iter=n_iter, n_warmup=n_warmup, algorithm=algorithm, seed=rep))
        raw = destandardize_draws(target.model, chains)
        for name, value in truth.items():
            lo, hi = hpd_interval(raw[name].to_numpy(), 0.95)
            covered += lo <= value <= hi
            total += 1
    return covered, total


def test_glm_hpd_intervals_cover_true_coefficients():
    def gauss(gen, n):
        x = gen.normal(size=n)
        return x, 1.0 + 2.0 * x + gen.normal(0.0, 1.0, n)

    def bernoulli(gen, n):
        x = gen.normal(size=n)
        return x, gen.binomial(1, expit(-0.5 + x)).astype(float)

    def poisson(gen, n):
        x = gen.normal(size=n)
        return x, gen.poisson(np.exp(0.5 + 0.5 * x)).astype(float)

    def exponential(gen, n):
        x = gen.uniform(0.0, 2.0, n)
        return x, gen.exponential(1.0 + 0.5 * x)

    cases = [
        ("gauss", {"b0": 1.0, "b[x]": 2.0, "sigma": 1.0}, gauss, Gibbs(), 1000, 200),
        ("bernoulli", {"b0": -0.5, "b[x]": 1.0}, bernoulli, MH(0.25), 2000, 500),
        ("poisson", {"b0": 0.5, "b[x]": 0.5}, poisson, MH(0.08), 2000, 500),
        ("exponential", {"b0": -1.0, "b[x]": -0.5}, exponential, MH(0.12), 2000, 500),
    ]
    pooled_covered = pooled_total = 0
    for family, truth, simulate, algorithm, n_iter, n_warmup in cases:
        obj = {"likelihood": family, "response": "y", "predictors": ["x"]}
        covered, total = recovery_coverage(obj, truth, simulate, algorithm, n_iter, n_warmup)
        assert covered >= 0.8 * total, (family, covered, total)
        pooled_covered += covered
        pooled_total += total
    assert pooled_covered >= 0.9 * pooled_total, (pooled_covered, pooled_total)


# --- предсказательные ---

def test_prior_predictive_uniform_binomial():
    pred = prior_predictive(Beta(1.0, 1.0), "binomial", Rng(31), 1000000, n=3)
    freq = np.bincount(pred.draws[:, 0].astype(int), minlength=4) / pred.n_draws
    assert np.all(np.abs(freq - 0.25) < 0.002)


def test_prior_predictive_narrow_gauss_prior():
    pred = prior_predictive(Gauss(1.0, 1e-9), "gauss", Rng(2), 200000, sigma=2.0)
    draws = pred.draws[:, 0]
    assert abs(draws.mean() - 1.0) < 4.0 * 2.0 / math.sqrt(draws.size)
    assert abs(draws.std() - 2.0) < 0.02


def test_prior_predictive_errors():
    try:
        prior_predictive(FlatPrior(), "gauss", Rng(1), 10)
        assert False
    except ImproperPriorError:
        pass
    try:
        prior_predictive(Beta(1.0, 1.0), "weibull", Rng(1), 10)
        assert False
    except ParameterError:
        pass


def test_prior_predictive_model_support():
    spec = parse_model_spec({"likelihood": "poisson", "response": "y", "predictors": ["x"]})
    X = DesignMatrix.from_columns(np.linspace(0.0, 1.0, 8), ("x",))
    model = compile(spec, np.arange(8.0), X).model
    pred = prior_predictive_model(model, X, Rng(4), 500)
    assert pred.draws.shape == (500, 8)
    assert np.all(pred.draws >= 0) and np.all(pred.draws == np.round(pred.draws))


def test_conjugate_posterior_predictive_is_student_t():
    joint = gauss_joint_conditional_conjugate(0.0, 1.0, 1.0, sufficient_stats([1.0, 2.0, 3.0]))
    pred = posterior_predictive_conjugate(joint, Rng(77), 200000)
    scale = math.sqrt((3.5 / 2.5) * (1.0 + 1.0 / 4.0))
    reference = stats.t(df=5.0, loc=1.5, scale=scale)
    draws = pred.draws[:, 0]
    assert abs(draws.mean() - 1.5) <= 3.0 * reference.std() / math.sqrt(draws.size)
    assert stats.kstest(draws, reference.cdf).statistic < 0.01


def test_posterior_predictive_point_mass():
    x, y = linear_data(40)
    X = DesignMatrix.from_columns(x, ("x",))
    spec = parse_model_spec({"likelihood": "gauss", "response": "y", "predictors": ["x"]})
    target = compile(spec, y, X)
    theta = np.array([0.0, 0.0, 0.0])
    row = target.outputs(theta)
    chains = chain_set(np.tile(row, (20000, 1)), names=target.output_names, n_free=target.dimension)
    X_new = DesignMatrix.from_columns(np.array([float(x.mean())]), ("x",))
    pred = posterior_predictive(chains, target.model, X_new, Rng(5))
    draws = pred.draws[:, 0]
    sd = float(np.std(y, ddof=1))
    assert abs(draws.mean() - y.mean()) < 4.0 * sd / math.sqrt(draws.size)
    assert abs(draws.std() / sd - 1.0) < 0.03
    again = posterior_predictive(chains, target, X_new, Rng(5))
    assert np.array_equal(pred.draws, again.draws)


def test_posterior_predictive_respects_support():
    gen = np.random.default_rng(8)
    x = gen.uniform(-1.0, 1.0, 30)
    X = DesignMatrix.from_columns(x, ("x",))
    for family, y in (("bernoulli", gen.integers(0, 2, 30)), ("poisson", gen.poisson(1.5, 30))):
        spec = parse_model_spec({"likelihood": family, "response": "y", "predictors": ["x"]})
        target = compile(spec, y.astype(float), X)
        chains = run(target, SamplerConfig(n_chains=2, n_iter=600, n_warmup=200, algorithm=MH(0.3), seed=3))
        pred = posterior_predictive(chains, target.model, X, Rng(1))
        assert pred.draws.shape == (chains.n_chains * chains.n_draws, 30)
        assert np.all(pred.draws >= 0) and np.all(pred.draws == np.round(pred.draws))
        if family == "bernoulli":
            assert set(np.unique(pred.draws)) <= {0.0, 1.0}


def test_posterior_predictive_column_mismatch():
    x, y = linear_data(20)
    spec = parse_model_spec({"likelihood": "gauss", "response": "y", "predictors": ["x"]})
    target = compile(spec, y, DesignMatrix.from_columns(x, ("x",)))
    chains = chain_set(np.tile(target.outputs(np.zeros(3)), (5, 1)), names=target.output_names, n_free=3)
    try:
        posterior_predictive(chains, target.model, DesignMatrix.from_columns(x, ("w",)), Rng(1))
        assert False
    except DimensionError:
        pass


def test_predictive_check_report():
    constant = PredictiveSample(np.zeros((300, 2)), None, "test")
    report = predictive_check_report(constant, [1.0, -1.0])
    assert report.pit.tolist() == [1.0, 0.0]
    assert close(report.observed_mean, 0.0)
    gen = np.random.default_rng(10)
    pred = PredictiveSample(gen.normal(size=(400, 3)), None, "test")
    report = predictive_check_report(pred, [0.0, 0.5, -0.5])
    assert all(sum(h["counts"]) == 400 for h in report.histograms)
    assert set(report.to_dict()) == {"observed_mean", "predictive_mean", "pit", "ks_distance", "histograms"}


def test_pit_uniform_for_true_process():
    gen = np.random.default_rng(11)
    pred = PredictiveSample(gen.normal(size=(100000, 1)), None, "truth")
    report = predictive_check_report(pred, gen.normal(size=10000))
    assert report.ks_distance < 0.02


# --- WAIC / DIC ---

def test_point_mass_chain_has_zero_complexity():
    target = conditional_conjugate_target(0.0, 1.0, 1.0, [0.5, 1.5, 2.0, 3.0])
    row = target.outputs(np.array([1.7, 0.1]))
    chains = chain_set(np.tile(row, (200, 1)), np.tile(row, (200, 1)), names=target.output_names, n_free=2)
    d = dic(chains, target)
    assert abs(d.p_dic) < 1e-9 and close(d.dic, d.deviance_at_mean, 1e-9)
    w = waic(pointwise_log_lik(chains, target))
    assert abs(w.p_waic) < 1e-9
    assert close(w.waic, -2.0 * target.log_likelihood(np.array([1.7, 0.1])), 1e-9)


def test_waic_properties():
    gen = np.random.default_rng(12)
    values = gen.normal(-1.0, 0.5, size=(400, 25))
    w = waic(PointwiseLogLik(values))
    assert w.p_waic >= 0.0
    assert close(w.waic, -2.0 * w.lppd + 2.0 * w.p_waic, 1e-12)
    shuffled = values[gen.permutation(400)][:, gen.permutation(25)]
    assert close(waic(PointwiseLogLik(shuffled)).waic, w.waic, 1e-10)


def test_dic_on_linear_model_counts_parameters():
    gen = np.random.default_rng(14)
    x = gen.normal(size=200)
    y = 0.5 + 1.5 * x + gen.normal(0.0, 1.0, 200)
    spec = parse_model_spec({"likelihood": "gauss", "response": "y", "predictors": ["x"]})
    target = compile(spec, y, DesignMatrix.from_columns(x, ("x",)))
    chains = run(target, SamplerConfig(n_chains=2, n_iter=3000, n_warmup=500, algorithm=Gibbs(), seed=15))
    d = dic(chains, target)
    assert 0.75 * 3 <= d.p_dic <= 1.25 * 3
    w = waic(pointwise_log_lik(chains, target))
    assert abs(w.waic - d.dic) <= 2.0 * w.se


def test_compare_models_weights():
    gen = np.random.default_rng(16)
    w1 = waic(PointwiseLogLik(gen.normal(-1.0, 0.1, size=(200, 10))))
    rows = compare_models({"a": (w1, None), "b": (w1, DicResult(1.0, 0.5, 0.5, 0.0))})
    assert [round(r.weight, 12) for r in rows] == [0.5, 0.5]
    assert rows[0].delta_waic == 0.0
    worse = waic(PointwiseLogLik(gen.normal(-3.0, 0.1, size=(200, 10))))
    rows = compare_models({"good": (w1, None), "bad": (worse, None)})
    assert rows[0].name == "good" and rows[0].weight > 0.99
    try:
        compare_models({"a": (w1, None), "c": (waic(PointwiseLogLik(np.zeros((200, 3)))), None)})
        assert False
    except DimensionError:
        pass


def test_waic_prefers_full_nested_model():
    candidates = {"const": [], "x1": ["x1"], "x1+x2": ["x1", "x2"]}
    wins = 0
    for rep in range(20):
        gen = np.random.default_rng(500 + rep)
        x1, x2 = gen.normal(size=100), gen.normal(size=100)
        y = 1.0 + x1 + 0.8 * x2 + gen.normal(0.0, 1.0, 100)
        columns = {"x1": x1, "x2": x2}
        results = {}
        for name, predictors in candidates.items():
            X = DesignMatrix.from_columns(
                np.column_stack([columns[p] for p in predictors]) if predictors else np.empty((100, 0)),
                tuple(predictors),
            )
            spec = parse_model_spec({"likelihood": "gauss", "response": "y", "predictors": predictors})
            target = compile(spec, y, X)
            chains = run(target, SamplerConfig(n_chains=2, n_iter=1000, n_warmup=200, algorithm=Gibbs(), seed=rep))
            results[name] = (waic(pointwise_log_lik(chains, target)), None)
        wins += compare_models(results)[0].name == "x1+x2"
    assert wins >= 18, wins


TESTS = [obj for name, obj in list(globals().items()) if name.startswith("test_") and callable(obj)]


def run_all() -> bool:
    print("🧪 ТЕСТИРОВАНИЕ СЭМПЛЕРОВ И МОДЕЛЕЙ BAYESCORE")
    print(f"📊 Версия: {APP_VERSION}")
    print("=" * 60)
    load_config()
    results = {}
    for test in TESTS:
        try:
            test()
            results[test.__name__] = True
            print(f"✅ {test.__name__}")
        except Exception as e:
            results[test.__name__] = False
            print(f"❌ {test.__name__}: {e!r}")
            traceback.print_exc()

    print("\n" + "=" * 60)
    print("📊 ИТОГОВЫЙ ОТЧЕТ:")
    print("=" * 60)
    total, passed = len(results), sum(results.values())
    for name, ok in results.items():
        print(f"   {('✅ PASS' if ok else '❌ FAIL').ljust(10)} {name}")
    percentage = (passed / total * 100) if total else 0
    print(f"\n🎯 Результат: {passed}/{total} тестов пройдено ({percentage:.1f}%)")
    return passed == total


if __name__ == "__main__":
    try:
        success = run_all()
        sys.exit(0 if success else 1)
    except KeyboardInterrupt:
        print("\n⏹️ Тестирование прервано пользователем")
        sys.exit(1)
