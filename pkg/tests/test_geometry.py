import json

import numpy as np
import pytest
from scipy.interpolate import BSpline
from shapely.geometry import Point, Polygon

from flowdesk import geometry as geo


def test_thickness_vanishes_at_leading_edge():
    assert geo.thickness(0.15, 0.0) == 0.0


def test_thickness_coefficients_fixed():
    assert (geo.A0, geo.A1, geo.A2, geo.A3, geo.A4) == (
        0.2969, -0.1260, -0.3516, 0.2843, -0.1015,
    )


def test_thickness_at_trailing_edge():
    # 0.15/0.2 * (0.2969 - 0.1260 - 0.3516 + 0.2843 - 0.1015), high-precision oracle
    assert geo.thickness(0.15, 1.0) == pytest.approx(0.0015750, abs=1e-7)


def test_thickness_domain_error():
    with pytest.raises(geo.GeometryError):
        geo.thickness(0.15, 1.2)
    with pytest.raises(geo.GeometryError):
        geo.thickness(0.15, -0.1)


def test_camber_zero():
    yc, dyc = geo.camber_line(0.0, 0.3, 0.5)
    assert yc == 0.0 and dyc == 0.0


def test_camber_peak_at_p():
    # substituting x=p in the fore branch gives m/p^2 (2p^2 - p^2) = m, slope 0
    yc, dyc = geo.camber_line(0.05, 0.3, 0.3)
    assert yc == pytest.approx(0.05, abs=1e-12)
    assert dyc == pytest.approx(0.0, abs=1e-12)


def test_camber_slope_at_origin():
    # derivative of the fore branch at x=0 is 2m/p
    yc, dyc = geo.camber_line(0.05, 0.3, 0.0)
    assert yc == 0.0
    assert dyc == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_camber_branches_agree_at_p():
    m, p = 0.07, 0.4
    below = geo.camber_line(m, p, p - 1e-13)
    above = geo.camber_line(m, p, p + 1e-13)
    assert below[0] == pytest.approx(above[0], abs=1e-12)
    assert below[1] == pytest.approx(above[1], abs=1e-10)


def test_profile_defaults_match_design_constants():
    assert geo.DESIGN_T == 0.15
    assert geo.M_RANGE == (0.01, 0.09)
    assert geo.P_RANGE == (0.20, 0.50)
    assert geo.DEFAULT_N_POINTS == 100
    assert geo.DEFAULT_N_CTRL == 30
    prof = geo.naca_profile(geo.AirfoilParams(t=0.15, m=0.05, p=0.3))
    assert prof.n_points == 100


def test_symmetric_profile_mirrors():
    prof = geo.naca_profile(geo.AirfoilParams(t=0.15, m=0.0, p=0.3), 100)
    assert np.allclose(prof.upper[:, 1], -prof.lower[:, 1], atol=1e-12)
    assert np.allclose(prof.upper[:, 0], prof.lower[:, 0], atol=1e-12)


def test_cambered_profile_recovers_camber():
    prof = geo.naca_profile(geo.AirfoilParams(t=0.15, m=0.05, p=0.3), 100)
    mid = 0.5 * (prof.upper[:, 1] + prof.lower[:, 1])
    assert abs(mid.max() - 0.05) < 1e-3


def test_profile_stations_monotone():
    prof = geo.naca_profile(geo.AirfoilParams(t=0.15, m=0.09, p=0.2), 100)
    assert prof.stations[0] == 0.0 and prof.stations[-1] == 1.0
    assert np.all(np.diff(prof.stations) > 0)


def test_profile_rejects_too_few_points():
    with pytest.raises(geo.GeometryError):
        geo.naca_profile(geo.AirfoilParams(t=0.15, m=0.05, p=0.3), 5)


def test_profile_determinism():
    a = geo.naca_profile(geo.AirfoilParams(t=0.15, m=0.03, p=0.4), 64)
    b = geo.naca_profile(geo.AirfoilParams(t=0.15, m=0.03, p=0.4), 64)
    assert np.array_equal(a.upper, b.upper) and np.array_equal(a.lower, b.lower)


def test_profile_json_csv_roundtrip():
    prof = geo.naca_profile(geo.AirfoilParams(t=0.15, m=0.05, p=0.3), 50)
    back = geo.AirfoilProfile.from_json(prof.to_json())
    assert np.allclose(back.upper, prof.upper)
    obj = json.loads(prof.to_json())
    assert set(obj) == {"params", "upper", "lower"}
    lines = prof.to_csv().strip().splitlines()
    assert len(lines) == len(prof.closed_polygon())
    assert all(len(line.split(",")) == 2 for line in lines)


# -- B-spline fitting --------------------------------------------------------

@pytest.mark.parametrize("m,p", [(0.01, 0.2), (0.05, 0.3), (0.09, 0.2), (0.09, 0.5), (0.0, 0.3)])
def test_bspline_fit_accuracy(m, p):
    prof = geo.naca_profile(geo.AirfoilParams(t=0.15, m=m, p=p), 100)
    curve, resid = geo.fit_bspline(prof)
    assert curve.n_ctrl == 30
    assert resid < 1e-3


def test_bspline_default_has_30_control_points():
    prof = geo.naca_profile(geo.AirfoilParams(t=0.15, m=0.05, p=0.3))
    curve, _ = geo.fit_bspline(prof)
    assert curve.n_ctrl == geo.DEFAULT_N_CTRL == 30
    assert len(curve.knots) == 30 + curve.degree + 1
    assert geo.branch_input(prof).shape == (60,)


def test_bspline_line_fit_collinear():
    t = np.linspace(0, 1, 120)
    line = np.column_stack([2 * t, 1 + 3 * t])
    curve, resid = geo.fit_bspline_points(line, n_ctrl=30)
    assert resid < 1e-9
    d = np.diff(curve.control_points, axis=0)
    cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
    assert np.abs(cross).max() < 1e-9


def test_bspline_reproduces_representable_curve():
    # sample a curve from the basis itself; the LS fit must recover it
    rng = np.random.default_rng(3)
    u = np.sort(rng.random(200))
    u[0], u[-1] = 0.0, 1.0
    knots = geo.clamped_knots(u, 12, 3)
    ctrl = rng.normal(size=(12, 2))
    data = BSpline(knots, ctrl, 3)(np.clip(u, 0, 1 - 1e-12))
    curve, _ = geo.fit_bspline_points(data, n_ctrl=12, u=u, knots=knots)
    assert np.abs(curve.control_points - ctrl).max() < 1e-9


def test_bspline_degenerate_input_raises():
    pts = np.zeros((40, 2))  # zero arc length
    with pytest.raises(geo.GeometryError):
        geo.fit_bspline_points(pts, n_ctrl=10)


def test_bspline_needs_enough_points():
    with pytest.raises(geo.GeometryError):
        geo.fit_bspline_points(np.random.default_rng(0).random((10, 2)), n_ctrl=30)


# -- domain sampling ----------------------------------------------------------

def test_sample_unit_square():
    spec = geo.DomainSpec(kind="unit_square")
    pts = geo.sample_domain(spec, 1000, seed=7)
    assert pts.shape == (1000, 2)
    assert pts.min() >= 0.0 and pts.max() <= 1.0


def test_sample_triangle_halfplanes():
    spec = geo.DomainSpec(kind="unit_right_triangle")
    pts = geo.sample_domain(spec, 1000, seed=7)
    assert np.all(pts[:, 0] >= 0) and np.all(pts[:, 1] >= 0)
    assert np.all(pts.sum(axis=1) <= 1.0 + 1e-12)


def test_sample_airfoil_exterior_excludes_interior():
    prof = geo.naca_profile(geo.AirfoilParams(t=0.15, m=0.05, p=0.3), 100)
    spec = geo.DomainSpec(kind="airfoil_exterior_box", profile=prof)
    pts = geo.sample_domain(spec, 500, seed=11)
    assert pts.shape == (500, 2)
    # independent containment oracle
    poly = Polygon(prof.closed_polygon())
    assert not any(poly.contains(Point(x, y)) for x, y in pts)
    xmin, xmax, ymin, ymax = geo.ANALYSIS_BOX
    assert pts[:, 0].min() >= xmin and pts[:, 0].max() <= xmax
    assert pts[:, 1].min() >= ymin and pts[:, 1].max() <= ymax


def test_sample_determinism():
    spec = geo.DomainSpec(kind="unit_square")
    a = geo.sample_domain(spec, 100, seed=3)
    b = geo.sample_domain(spec, 100, seed=3)
    assert np.array_equal(a, b)


def test_point_in_polygon_matches_shapely():
    prof = geo.naca_profile(geo.AirfoilParams(t=0.15, m=0.05, p=0.3), 60)
    loop = prof.closed_polygon()
    poly = Polygon(loop)
    rng = np.random.default_rng(5)
    pts = rng.uniform([-0.2, -0.3], [1.2, 0.3], size=(500, 2))
    ours = geo.point_in_polygon(pts, loop)
    theirs = np.array([poly.contains(Point(x, y)) for x, y in pts])
    # boundary-grazing points may differ; none expected from random draws
    assert np.array_equal(ours, theirs)


# -- surface frames -----------------------------------------------------------

def test_frames_closure_zero():
    prof = geo.naca_profile(geo.AirfoilParams(t=0.15, m=0.05, p=0.3), 100)
    fr = geo.surface_frames(prof)
    total = (fr.normals * fr.ds[:, None]).sum(axis=0)
    assert abs(total[0]) < 1e-12 and abs(total[1]) < 1e-12


def test_frames_unit_square():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    fr = geo.surface_frames(square)
    assert np.allclose(fr.ds, 1.0)
    expected = {(0.5, 0.0): (0, -1), (1.0, 0.5): (1, 0), (0.5, 1.0): (0, 1), (0.0, 0.5): (-1, 0)}
    for mid, nrm in zip(fr.midpoints, fr.normals):
        assert tuple(np.round(nrm).astype(int)) == expected[tuple(np.round(mid, 6))]


def test_frames_tangent_normal_orthogonal():
    prof = geo.naca_profile(geo.AirfoilParams(t=0.15, m=0.07, p=0.25), 80)
    fr = geo.surface_frames(prof)
    dots = (fr.normals * fr.tangents).sum(axis=1)
    assert np.abs(dots).max() < 1e-14
    assert np.all(fr.ds > 0)


def test_frames_symmetric_profile_mirror():
    prof = geo.naca_profile(geo.AirfoilParams(t=0.15, m=0.0, p=0.3), 60)
    fr = geo.surface_frames(prof)
    n = len(fr)
    # loop: 59 upper segments, 59 lower, 1 closing; upper seg k mirrors lower seg n-2-k
    for k in range(59):
        nu, nl = fr.normals[k], fr.normals[n - 2 - k]
        assert nu[0] == pytest.approx(nl[0], abs=1e-12)
        assert nu[1] == pytest.approx(-nl[1], abs=1e-12)


def test_frames_reject_self_intersection():
    bowtie = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(geo.GeometryError):
        geo.surface_frames(bowtie)


def test_frames_normals_outward_regardless_of_winding():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    fr_ccw = geo.surface_frames(square)
    fr_cw = geo.surface_frames(square[::-1])
    # outward normals must agree segment-by-segment (match via midpoints)
    for mid, nrm in zip(fr_cw.midpoints, fr_cw.normals):
        j = np.argmin(np.linalg.norm(fr_ccw.midpoints - mid, axis=1))
        assert np.allclose(nrm, fr_ccw.normals[j], atol=1e-12)
