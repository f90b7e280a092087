import hashlib
import io
import math
import warnings
from importlib import resources

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochgm.gmpe import (CoefficientParseError, Scenario, ScenarioRangeWarning,
                          decompose_residuals, default_table, load_coefficients,
                          parse_param_table, parse_sa_table, predict_ai, predict_dsr,
                          predict_fc_params, predict_sa, predict_spectrum)
from stochgm.metrics import TABULATED_PERIODS

mpmath.mp.dps = 40

SA_SHA256 = "7f8aaf4f1fd0134d437c908fa116cadbaff3bd0408804f9bd9dcff95e73f5db3"
PARAM_SHA256 = "c8f29ece7e190ec26f1c6d626ae1a926e5f4e8bad122fbaf7cb3de43801b943a"

# printed digits, typed independently of the shipped files
PGA = dict(a1="-0.053447", a2="0.51153", a3="-0.13258", a4="0.22396", Mh="5.6",
           b1="-0.96551", b2="0.2107", b3="-0.014", h="1.36", c1="-0.33707")
AI_GM = dict(a1="7.92892", a2="3.88485", a3="-0.15950", b1="-3.04614", b2="-0.24972",
             h="16.131", c1="-0.71189")
SMD_GM = dict(a1="0.37827", a2="0.33056", b1="0.62982", b2="-0.036646", h="2.5",
              c1="-0.10080")


def mp(c):
    return {k: mpmath.mpf(v) for k, v in c.items()}


def mp_sa(c, mw, r, vs30):
    c, mw, r, vs30 = mp(c), mpmath.mpf(str(mw)), mpmath.mpf(str(r)), mpmath.mpf(str(vs30))
    dm = mw - c["Mh"]
    mag = c["a1"] + c["a2"] * dm + c["a3"] * dm ** 2 if mw <= c["Mh"] else c["a1"] + c["a4"] * dm
    rr = mpmath.sqrt(r ** 2 + c["h"] ** 2)
    return (mag + (c["b1"] + c["b2"] * (mw - mpmath.mpf("4.5"))) * mpmath.log(rr)
            + c["b3"] * rr + c["c1"] * mpmath.log(vs30 / 800))


def mp_ai(c, mw, r, vs30):
    c, mw, r, vs30 = mp(c), mpmath.mpf(str(mw)), mpmath.mpf(str(r)), mpmath.mpf(str(vs30))
    dm = mw - mpmath.mpf("5.6")
    rr = mpmath.sqrt(r ** 2 + c["h"] ** 2)
    return (c["a1"] + c["a2"] * dm + c["a3"] * dm ** 2
            + (c["b1"] + c["b2"] * (mw - mpmath.mpf("4.5"))) * mpmath.log(rr)
            + c["c1"] * mpmath.log(vs30 / 800))


def mp_dsr(c, mw, r, vs30):
    c, mw, r, vs30 = mp(c), mpmath.mpf(str(mw)), mpmath.mpf(str(r)), mpmath.mpf(str(vs30))
    rr = mpmath.sqrt(r ** 2 + c["h"] ** 2)
    return (c["a1"] + c["a2"] * (mw - mpmath.mpf("5.6"))
            + (c["b1"] + c["b2"] * (mw - mpmath.mpf("4.5"))) * mpmath.log(rr)
            + c["c1"] * mpmath.log(vs30 / 800))


def data_bytes(name):
    return resources.files("stochgm").joinpath("data").joinpath(name).read_bytes()


# --- golden values ---------------------------------------------------------------

def test_pga_golden():
    p = predict_sa(Scenario(5.6, 10.0, 800.0), 0.0)
    ref = mp_sa(PGA, 5.6, 10.0, 800.0)
    assert p.mean_ln == pytest.approx(float(ref), rel=1e-12)
    assert p.median == pytest.approx(float(mpmath.exp(ref)), rel=1e-6)
    # quoted to four digits
    assert p.median == pytest.approx(0.1510, rel=1e-3)
    assert p.mean_ln == pytest.approx(-1.89096, abs=5e-6)
    assert p.units == "g"


def test_ai_golden():
    p = predict_ai(Scenario(5.6, 0.0, 800.0), "GM")
    ref = mp_ai(AI_GM, 5.6, 0.0, 800.0)
    assert p.median == pytest.approx(float(mpmath.exp(ref)), rel=1e-6)
    assert p.median == pytest.approx(0.271, rel=1e-3)
    # the quoted intermediate -1.3059 carries a rounding slip; exact value -1.30546
    assert p.mean_ln == pytest.approx(-1.3059, abs=1e-3)


def test_dsr_golden():
    p = predict_dsr(Scenario(5.6, 0.0, 800.0), "GM")
    ref = mp_dsr(SMD_GM, 5.6, 0.0, 800.0)
    assert p.median == pytest.approx(float(mpmath.exp(ref)), rel=1e-6)
    assert p.median == pytest.approx(2.505, rel=1e-3)
    assert p.mean_ln == pytest.approx(0.91844, abs=1e-5)


@given(st.floats(4.5, 6.9), st.floats(0, 200), st.floats(500, 1500))
def test_golden_forms_everywhere(mw, r, vs30):
    s = Scenario(mw, r, vs30)
    assert predict_sa(s, 0.0).mean_ln == pytest.approx(float(mp_sa(PGA, mw, r, vs30)),
                                                        rel=1e-10, abs=1e-12)
    assert predict_ai(s).mean_ln == pytest.approx(float(mp_ai(AI_GM, mw, r, vs30)),
                                                  rel=1e-10, abs=1e-12)
    assert predict_dsr(s).mean_ln == pytest.approx(float(mp_dsr(SMD_GM, mw, r, vs30)),
                                                   rel=1e-10, abs=1e-12)


# --- table integrity ------------------------------------------------------------------

def test_checksums():
    assert hashlib.sha256(data_bytes("sa_coefficients.csv")).hexdigest() == SA_SHA256
    assert hashlib.sha256(data_bytes("param_coefficients.csv")).hexdigest() == PARAM_SHA256


def test_table_shape_and_rows():
    t = default_table()
    assert len(t.sa) == 22
    assert t.periods == TABULATED_PERIODS
    assert len(t.params) == 6
    pga = t.sa_row(0.0)
    assert (pga.a1, pga.h, pga.sigma) == (-0.053447, 1.36, 0.84507)
    ai = t.param_row("AI", "GM")
    assert (ai.a1, ai.h, ai.sigma) == (7.92892, 16.131, 1.5245)
    b = t.param_row("lnB", "GM")
    assert (b.c1, b.tau) == (-0.40941, 0.27920)
    a = t.param_row("A", "GM")
    assert a.a3 is None and a.b2 is None and a.h is None
    assert t.param_row("DSR", "IND").a3 is None


def test_sigma_consistency():
    t = default_table()
    for r in list(t.sa) + list(t.params):
        assert abs(r.sigma - math.hypot(r.phi, r.tau)) / r.sigma < 2e-3


def test_lookup_errors():
    t = default_table()
    with pytest.raises(KeyError, match="available"):
        t.sa_row(0.5)
    with pytest.raises(KeyError):
        t.param_row("AI", "IND")
    with pytest.raises(KeyError):
        predict_sa(Scenario(5, 10, 800), 2.0)
    with pytest.raises(ValueError):
        predict_ai(Scenario(5, 10, 800), "IND")
    with pytest.raises(ValueError):
        predict_dsr(Scenario(5, 10, 800), "AM")


# --- functional-form properties ------------------------------------------------------------

def test_site_term_vanishes_at_reference():
    s1, s2 = Scenario(6.0, 20.0, 800.0), Scenario(6.0, 20.0, 800.0000001)
    for p in TABULATED_PERIODS:
        assert predict_sa(s1, p).mean_ln - predict_sa(s2, p).mean_ln == pytest.approx(
            -default_table().sa_row(p).c1 * math.log(800.0000001 / 800.0), abs=1e-15)


@pytest.mark.parametrize("period", TABULATED_PERIODS)
def test_hinge_continuity(period):
    row = default_table().sa_row(period)
    below = predict_sa(Scenario(row.Mh - 1e-9, 15.0, 600.0), period).mean_ln
    above = predict_sa(Scenario(row.Mh + 1e-9, 15.0, 600.0), period).mean_ln
    assert abs(above - below) < 1e-7
    at = predict_sa(Scenario(row.Mh, 0.0, 800.0), period).mean_ln
    geo = (row.b1 + row.b2 * (row.Mh - 4.5)) * math.log(row.h) + row.b3 * row.h
    assert at == pytest.approx(row.a1 + geo, abs=1e-12)


@given(st.floats(4.5, 6.9), st.floats(0, 150), st.floats(500, 1400))
def test_site_term_direction(mw, r, vs30):
    lo, hi = Scenario(mw, max(r, 0.5), vs30), Scenario(mw, max(r, 0.5), vs30 + 50)
    t = default_table()
    for p in TABULATED_PERIODS:
        if t.sa_row(p).c1 < 0:
            assert predict_sa(hi, p).mean_ln < predict_sa(lo, p).mean_ln
    assert predict_ai(hi).mean_ln < predict_ai(lo).mean_ln
    assert predict_dsr(hi).mean_ln < predict_dsr(lo).mean_ln
    assert predict_fc_params(hi)[0].mean_ln > predict_fc_params(lo)[0].mean_ln
    assert predict_fc_params(hi)[1].mean_ln < predict_fc_params(lo)[1].mean_ln


def test_distance_and_magnitude_trends():
    ai = [predict_ai(Scenario(5.5, r, 700)).mean_ln for r in (50, 100, 200)]
    assert ai[0] > ai[1] > ai[2]
    d = [predict_dsr(Scenario(m, 20, 700)).mean_ln for m in (4.5, 5.5, 6.5)]
    assert d[0] < d[1] < d[2]
    a = [predict_fc_params(Scenario(5.5, r, 700))[0].mean_ln for r in (1, 10, 100)]
    assert a[0] > a[1] > a[2]


def test_fc_params():
    a, lnb = predict_fc_params(Scenario(5.6, 1.0, 800.0))
    assert a.mean_ln == pytest.approx(3.55833, abs=1e-12)
    assert lnb.mean_ln == pytest.approx(-1.01196, abs=1e-12)
    assert lnb.median == pytest.approx(0.3635, abs=5e-5)
    assert (a.sigma, lnb.tau) == (0.34439, 0.27920)
    with pytest.raises(ValueError, match="R_RUP"):
        predict_fc_params(Scenario(5.6, 0.0, 800.0))


def test_range_warning():
    with pytest.warns(ScenarioRangeWarning):
        p = predict_sa(Scenario(7.5, 10.0, 800.0), 0.0)
    assert p.flags and "mw" in p.flags[0]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert predict_sa(Scenario(6.0, 10.0, 800.0), 0.0).flags == ()
    with pytest.raises(ValueError):
        Scenario(5.0, -1.0, 800.0)


def test_spectrum_covers_all_periods():
    periods, preds = predict_spectrum(Scenario(6.6, 30.0, 550.0))
    assert periods == TABULATED_PERIODS
    assert [p.mean_ln for p in preds] == [predict_sa(Scenario(6.6, 30.0, 550.0), q).mean_ln
                                          for q in periods]


# --- override files ------------------------------------------------------------------------

def test_override_roundtrip_and_errors():
    sa_text = data_bytes("sa_coefficients.csv").decode()
    par_text = data_bytes("param_coefficients.csv").decode()
    t = load_coefficients(io.StringIO(sa_text), io.StringIO(par_text))
    assert t == default_table()

    lines = sa_text.splitlines()
    bad = lines[:4] + [lines[4].replace("1.0402", "1.04o2", 1)] + lines[5:]
    with pytest.raises(CoefficientParseError) as e:
        parse_sa_table("\n".join(bad))
    assert e.value.row == 5 and e.value.column == "a1"
    assert "row 5" in str(e.value)

    with pytest.raises(CoefficientParseError) as e:
        parse_sa_table("\n".join(lines[:2] + [lines[2] + ",7"]))
    assert e.value.row == 3

    with pytest.raises(CoefficientParseError, match="missing"):
        parse_sa_table(lines[0].replace(",h,", ",hh,") + "\n" + lines[1])

    plines = par_text.splitlines()
    with pytest.raises(CoefficientParseError) as e:
        parse_param_table("\n".join([plines[0], plines[1].replace("7.90495", "X")]))
    assert e.value.column == "a1"
    with pytest.raises(CoefficientParseError, match="unknown target"):
        parse_param_table("\n".join([plines[0], plines[1].replace("AI (m/s)", "PGV")]))
    with pytest.raises(CoefficientParseError):
        parse_sa_table("")


def test_override_changes_prediction(tmp_path):
    sa_text = data_bytes("sa_coefficients.csv").decode().replace("-0.053447", "0.946553", 1)
    p = tmp_path / "sa.csv"
    p.write_text(sa_text, encoding="utf-8")
    t = load_coefficients(p)
    s = Scenario(5.6, 10.0, 800.0)
    assert predict_sa(s, 0.0, t).mean_ln - predict_sa(s, 0.0).mean_ln == pytest.approx(1.0)


# --- residual decomposition ---------------------------------------------------------------

def test_decompose_limits():
    big = decompose_residuals([("e", 0.7)] * 100000, phi=0.6, tau=0.5)
    assert big.delta_b["e"] == pytest.approx(0.7, rel=1e-4)
    flat = decompose_residuals([("a", 0.3), ("b", -1.0), ("a", 0.1)], phi=0.6, tau=0.0)
    assert flat.delta_b == {"a": 0.0, "b": 0.0}
    assert flat.delta_w == (0.3, -1.0, 0.1)


def test_decompose_hand_computed():
    recs = [("e1", 0.5), ("e1", 0.1), ("e1", 0.3), ("e2", -0.4), ("e2", 0.0)]
    phi, tau = 0.6, 0.4
    d = decompose_residuals(recs, phi, tau)
    # e1: n=3 mean 0.3 -> 0.16*3*0.3/(0.48+0.36); e2: n=2 mean -0.2 -> 0.16*2*-0.2/(0.32+0.36)
    assert d.delta_b["e1"] == pytest.approx(0.144 / 0.84, rel=1e-12)
    assert d.delta_b["e2"] == pytest.approx(-0.064 / 0.68, rel=1e-12)
    assert d.delta_w[3] == pytest.approx(-0.4 + 0.064 / 0.68, rel=1e-12)


@given(st.lists(st.tuples(st.integers(0, 4), st.floats(-5, 5)), min_size=1, max_size=40),
       st.floats(0.05, 2), st.floats(0, 2))
def test_decompose_identity(recs, phi, tau):
    d = decompose_residuals(recs, phi, tau)
    events = [e for e, _ in recs]
    assert np.allclose(d.total(events), [r for _, r in recs], atol=1e-12)
    for e, db in d.delta_b.items():
        rs = np.array([r for ev, r in recs if ev == e])
        # conditional mean: tau^2 sum(r - dB) = phi^2 dB
        assert tau * tau * np.sum(rs - db) == pytest.approx(phi * phi * db, abs=1e-9)


def test_decompose_errors():
    with pytest.raises(ValueError):
        decompose_residuals([], 0.5, 0.5)
    with pytest.raises(ValueError):
        decompose_residuals([("a", 1.0)], 0.0, 0.5)
