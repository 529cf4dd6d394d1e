import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thzris.channel import (
    BOLTZMANN,
    DEFAULT_RECEIVER_CHAIN,
    SPEED_OF_LIGHT,
    AbsorptionModel,
    AbsorptionRangeError,
    DegenerateTurbulence,
    Environment,
    HopSpec,
    Impairments,
    LinkBudget,
    Stage,
    absorption_coeff,
    aperture_param,
    gg_params,
    lin_to_db,
    noise_factor,
    noise_power,
    path_gain,
    pointing_params,
    rytov_variance,
    sdnr,
    se_ceiling,
    threshold_from_se,
    transmission_snr,
    turbulence_params,
)

from oracles import vapour_density, water_vapour_absorption_lbl


def test_rytov_examples():
    assert rytov_variance(0.0, 300e9, 100.0) == 0.0
    r = rytov_variance(1e-13, 300e9, 200.0) / rytov_variance(1e-13, 300e9, 100.0)
    assert abs(r - 2.0 ** (11.0 / 6.0)) < 1e-12
    k = 2.0 * math.pi * 300e9 / 299792458.0
    assert abs(rytov_variance(1e-11, 300e9, 100.0) - 1.23e-11 * k ** (7 / 6) * 100.0 ** (11 / 6)) < 1e-18
    assert abs(rytov_variance(1e-11, 300e9, 100.0) - 1.541e-3) < 5e-6


def test_aperture_examples():
    f = SPEED_OF_LIGHT / 1e-3
    assert aperture_param(0.0, f, 100.0) == 0.0
    b = math.sqrt(2.0 * 1e-3 * 100.0 / math.pi)
    assert abs(aperture_param(b, f, 100.0) - 1.0) < 1e-14
    assert abs(aperture_param(0.1, f, 100.0) - 0.39633) < 1e-5


def _gg_oracle(s2, D):
    # formulas re-typed independently of the implementation
    s = (s2 ** 0.5) ** (12.0 / 5.0)  # sigma_R^(12/5)
    a = 1.0 / (math.exp(0.49 * s2 / (1 + 0.65 * D ** 2 + 1.11 * s) ** (7 / 6)) - 1)
    b = 1.0 / (math.exp(0.51 * s2 * (1 + 0.69 * s) ** (-5 / 6) / (1 + 0.9 * D ** 2 + 0.62 * D ** 2 * s)) - 1)
    return a, b


@pytest.mark.parametrize("s2,D", [(0.25, 0.0), (4.0, 0.0), (0.05, 0.3), (1.7, 1.2)])
def test_gg_params_against_formula(s2, D):
    a, b = gg_params(s2, D)
    ra, rb = _gg_oracle(s2, D)
    assert abs(a - ra) <= 1e-12 * ra and abs(b - rb) <= 1e-12 * rb


def test_gg_params_examples():
    a, b = gg_params(0.25, 0.0)
    assert round(a, 2) == 9.71 and round(b, 2) == 8.20
    a, b = gg_params(4.0, 0.0)
    assert round(a, 2) == 4.34 and round(b, 2) == 1.31
    with pytest.raises(DegenerateTurbulence):
        gg_params(1e-7, 0.0)


def test_gg_params_positive_and_ordered_without_aperture_averaging():
    for s2 in np.geomspace(1e-3, 25.0, 200):
        a, b = gg_params(s2, 0.0)
        assert a >= b > 0
    for s2 in np.geomspace(1e-3, 25.0, 40):
        for D in np.linspace(0.0, 2.0, 11):
            a, b = gg_params(s2, D)
            assert a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)


def test_gg_params_order_flips_with_strong_aperture_averaging():
    # aperture averaging damps the small-scale term hardest, so beta overtakes alpha
    a, b = gg_params(1.0, 1.5)
    assert b > a


def test_degenerate_hop_is_deterministic():
    tp = turbulence_params(HopSpec(100.0), Environment(Cn2=0.0))
    assert tp.deterministic


def test_pointing_examples():
    pp = pointing_params(0.1, 0.1, 0.02)
    assert abs(pp.v - math.sqrt(math.pi / 2.0)) < 1e-15
    assert abs(pp.A_o - math.erf(math.sqrt(math.pi / 2.0)) ** 2) < 1e-14
    assert abs(pp.A_o - 0.8532) < 1e-4
    # sigma = w_eq / 2 gives xi = 1
    pp1 = pointing_params(0.1, 0.1, pp.w_eq / 2.0)
    assert abs(pp1.xi - 1.0) < 1e-14
    wide = pointing_params(50.0, 0.1, 0.02)
    assert wide.A_o == 1.0 and wide.xi == math.inf


def test_equivalent_beam_radius_formula():
    b, w = 0.07, 0.12
    pp = pointing_params(b, w, 0.03)
    v = math.sqrt(math.pi) * b / (math.sqrt(2.0) * w)
    ref = w * w * math.sqrt(math.pi) * math.erf(v) / (2.0 * v * math.exp(-v * v))
    assert abs(pp.w_eq ** 2 - ref) < 1e-15
    assert abs(pp.xi / (pp.w_eq ** 2 / (4.0 * 0.03 ** 2)) - 1.0) < 1e-14


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.5), st.floats(0.01, 0.5), st.floats(0.001, 0.2))
def test_pointing_properties(b, w, s):
    pp = pointing_params(b, w, s)
    assert 0.0 < pp.A_o <= 1.0
    wider = pointing_params(b, w, s * 1.1).xi
    assert wider < pp.xi or wider == pp.xi == math.inf


def test_absorption_modes():
    assert absorption_coeff(Environment(absorption=AbsorptionModel("constant", 0.01))) == 0.01
    table = ((250e9, 1e-4), (300e9, 3e-4), (350e9, 9e-4))
    env = Environment(f=300e9, absorption=AbsorptionModel("table", table=table))
    assert absorption_coeff(env) == 3e-4
    with pytest.raises(AbsorptionRangeError):
        absorption_coeff(Environment(f=400e9, absorption=AbsorptionModel("table", table=table)))
    with pytest.raises(AbsorptionRangeError):
        absorption_coeff(Environment(f=100e9, absorption=AbsorptionModel("simplified")))


@pytest.mark.parametrize("f_ghz", [280.0, 300.0, 340.0, 390.0])
def test_simplified_absorption_against_line_by_line(f_ghz):
    env = Environment(f=f_ghz * 1e9, absorption=AbsorptionModel("simplified"))
    lbl = float(water_vapour_absorption_lbl(f_ghz, 273.0, 101325.0, vapour_density(273.0, 0.5))[0]) / 1000.0
    got = absorption_coeff(env)
    assert 0.5 <= got / lbl <= 2.0


def test_path_gain_examples():
    env = Environment(f=300e9)
    g1 = path_gain(HopSpec(100.0, amp_gain_factor=math.sqrt(1e5)), env)
    # reference values use c = 3e8; the code uses the exact speed of light
    assert abs(g1 / 2.5166e-4 - 1.0) < 1e-3
    gm = path_gain(HopSpec(100.0, amp_gain_factor=1.0), env)
    assert abs(gm / 7.9578e-7 - 1.0) < 1e-3
    assert gm == SPEED_OF_LIGHT / (4.0 * math.pi * 300e9 * 100.0)
    half = path_gain(HopSpec(100.0), env, kappa=2.0 * math.log(2.0) / 100.0)
    assert abs(half / gm - 0.5) < 1e-15


def test_path_gain_decreasing():
    env = Environment(f=300e9)
    gains = [path_gain(HopSpec(d), env, kappa=1e-3) for d in np.linspace(10, 500, 50)]
    assert all(b < a for a, b in zip(gains, gains[1:]))
    ks = [path_gain(HopSpec(100.0), env, kappa=k) for k in np.linspace(0, 0.05, 20)]
    assert all(b < a for a, b in zip(ks, ks[1:]))


def test_noise_examples():
    env = Environment(temperature=273.0)
    bare = noise_power(LinkBudget(receiver_chain=()), env)
    assert abs(bare - BOLTZMANN * 273.0 * 50e9) < 1e-22
    assert abs(lin_to_db(bare) + 97.25) < 0.01
    F = noise_factor(DEFAULT_RECEIVER_CHAIN)
    assert abs(F - 1.26) < 0.005
    assert abs(lin_to_db(noise_power(LinkBudget(), env)) + 96.2) < 0.05
    assert noise_factor((Stage(10, 0), Stage(-3, 0))) == 1.0


def test_friis_by_hand():
    # LNA 35/1, mixer -5/6, misc -3/3
    F1, F2, F3 = 10 ** 0.1, 10 ** 0.6, 10 ** 0.3
    G1, G2 = 10 ** 3.5, 10 ** -0.5
    assert abs(noise_factor(DEFAULT_RECEIVER_CHAIN) - (F1 + (F2 - 1) / G1 + (F3 - 1) / (G1 * G2))) < 1e-15


def test_adding_noisy_stage_never_lowers_noise():
    env = Environment()
    base = noise_power(LinkBudget(), env)
    for g, nf in [(10, 2), (-6, 6), (0, 0.5)]:
        lb = LinkBudget(receiver_chain=DEFAULT_RECEIVER_CHAIN + (Stage(g, nf),))
        assert noise_power(lb, env) >= base


def test_sdnr_examples():
    assert sdnr(2.0, 3.0, 4.0, Impairments()) == 4.0 * 3.0 / 4.0
    assert abs(sdnr(1e9, 1.0, 1.0, Impairments(0.1, 0.1)) - 50.0) < 1e-9
    assert abs(sdnr(10.0, 1.0, 1.0, Impairments(0.1, 0.1)) - 100.0 / 3.0) < 1e-12


def test_sdnr_monotone_and_bounded():
    imp = Impairments(0.1, 0.2)
    A = np.geomspace(1e-3, 1e6, 400)
    g = sdnr(A, 1.0, 1e-3, imp)
    assert np.all(np.diff(g) > 0) and np.all(g <= 1.0 / imp.kappa2)


def test_transmission_snr_examples():
    assert transmission_snr(1.0, 1.0, [1.0, 1.0]) == 1.0
    assert abs(transmission_snr(1.0, 1.0, [2.0, 1.0]) - 2.0) < 1e-15
    assert abs(transmission_snr(1.0, 2.376e-10, [1e-5, 1e-5]) - 0.4209) < 1e-4


def test_se_ceiling_examples():
    assert se_ceiling(Impairments()) == math.inf
    assert abs(se_ceiling(Impairments(0.1, 0.1)) - math.log2(51.0)) < 1e-14
    assert threshold_from_se(2.0) == 3.0


def test_link_budget_gain_factors():
    lb = LinkBudget(R=(0.5, 0.9))
    assert lb.amp_gain_factors(1) == [1e5]
    assert lb.amp_gain_factors(4) == [math.sqrt(1e5), 0.5, 0.9, math.sqrt(1e5)]


@pytest.mark.parametrize("kw", [dict(d=-5.0), dict(d=1.0, b=-1.0), dict(d=1.0, w_d=0.0),
                                dict(d=1.0, has_misalignment=True)])
def test_hop_validation(kw):
    with pytest.raises(ValueError):
        HopSpec(**kw)


def test_environment_validation():
    with pytest.raises(ValueError):
        Environment(relative_humidity=1.5)
    with pytest.raises(ValueError):
        Environment(f=0.0)
