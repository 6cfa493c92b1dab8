"""Classical solvers, current extraction, and synthetic-data sampling."""
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from deepsurrogate.nn.autodiff import NumericalError
from deepsurrogate.nn.network import DenseNetwork, init_dense
from deepsurrogate.nn.rbf import split_head_outputs
from deepsurrogate.problems import Box, IntegralProblem, fin_problem, \
    voltammetry_pde
from deepsurrogate.reference import (
    GridSolution,
    gen_synthetic_data,
    read_dataset,
    solve_fin_fd,
    solve_volterra_first_kind,
    solve_volterra_second_kind,
    surrogate_current,
    write_dataset,
)
from deepsurrogate.trainer import RbfHead, SurrogateModel, TrainConfig

from conftest import assert_rel_close


def _abel_problem(b_star=20.0):
    """First-kind problem with the square-root kernel whose solution is 1."""
    return IntegralProblem(
        problem_id="abel", kind="first", volterra=True, a=0.0, b_star=b_star,
        v=lambda t, th: -2.0 * np.sqrt(t),
        k=lambda x, y, th: 1.0 / np.sqrt(x - y),
        param_domain=Box((0.0, 0.0)))


def _flat_kernel_problem(kind, v):
    return IntegralProblem(
        problem_id="flat", kind=kind, volterra=True, a=0.0, b_star=2.0,
        v=v, k=lambda x, y, th: np.ones_like(np.asarray(x, dtype=np.float64)),
        param_domain=Box((0.0, 0.0)))


# -- first-kind marching ---------------------------------------------------

def test_square_root_kernel_solution_is_flat_within_a_percent():
    sol = solve_volterra_first_kind(_abel_problem(), [0.0], dt=1e-3)
    mask = sol.grid >= 0.1
    assert np.max(np.abs(sol.values[mask] - 1.0)) <= 1e-2


def test_square_root_kernel_error_shrinks_as_the_step_halves():
    errors = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        sol = solve_volterra_first_kind(_abel_problem(), [0.0], dt=dt)
        mask = sol.grid >= 0.1
        errors.append(np.max(np.abs(sol.values[mask] - 1.0)))
    assert errors[0] > errors[1] > errors[2]


def test_flat_kernel_first_kind_march_is_exact_on_binary_steps():
    problem = _flat_kernel_problem("first", lambda t, th: -t)
    sol = solve_volterra_first_kind(problem, [0.0], dt=0.125)
    assert_array_equal(sol.values, np.ones(16))
    assert_array_equal(sol.grid, 0.125 * (np.arange(16) + 0.5))


def test_vanishing_kernel_makes_the_first_kind_system_singular():
    problem = IntegralProblem(
        problem_id="flat", kind="first", volterra=True, a=0.0, b_star=2.0,
        v=lambda t, th: -t,
        k=lambda x, y, th: np.zeros_like(np.asarray(x, dtype=np.float64)),
        param_domain=Box((0.0, 0.0)))
    with pytest.raises(NumericalError, match="vanishing diagonal"):
        solve_volterra_first_kind(problem, [0.0], dt=0.5)


def test_first_kind_solver_validates_kind_and_step():
    second = _flat_kernel_problem("second", lambda t, th: -t)
    with pytest.raises(ValueError, match="first-kind"):
        solve_volterra_first_kind(second, [0.0], dt=0.1)
    first = _flat_kernel_problem("first", lambda t, th: -t)
    with pytest.raises(ValueError, match="dt"):
        solve_volterra_first_kind(first, [0.0], dt=0.0)
    with pytest.raises(ValueError, match="interval"):
        solve_volterra_first_kind(first, [0.0], dt=30.0)


# -- second-kind marching --------------------------------------------------

def test_zero_kernel_second_kind_solution_equals_the_forcing():
    problem = IntegralProblem(
        problem_id="free", kind="second", volterra=True, a=0.0, b_star=2.0,
        v=lambda t, th: t ** 2,
        k=lambda x, y, th: np.zeros_like(np.asarray(x, dtype=np.float64)),
        param_domain=Box((0.0, 0.0)))
    sol = solve_volterra_second_kind(problem, [0.0], dt=0.25)
    assert_array_equal(sol.values, sol.grid ** 2)


def test_unit_kernel_second_kind_matches_the_exponential():
    problem = IntegralProblem(
        problem_id="exp", kind="second", volterra=True, a=0.0, b_star=1.0,
        v=lambda t, th: np.ones_like(np.asarray(t, dtype=np.float64)),
        k=lambda x, y, th: np.ones_like(np.asarray(x, dtype=np.float64)),
        param_domain=Box((0.0, 0.0)))
    sol = solve_volterra_second_kind(problem, [0.0], dt=1e-3)
    assert np.max(np.abs(sol.values - np.exp(sol.grid))) <= 1e-4
    errors = []
    for dt in (1e-2, 5e-3):
        s = solve_volterra_second_kind(problem, [0.0], dt=dt)
        errors.append(np.max(np.abs(s.values - np.exp(s.grid))))
    assert 3.0 < errors[0] / errors[1] < 5.0


def test_second_kind_solver_rejects_first_kind_problems():
    first = _flat_kernel_problem("first", lambda t, th: -t)
    with pytest.raises(ValueError, match="second-kind"):
        solve_volterra_second_kind(first, [0.0], dt=0.1)


# -- fin finite differences ------------------------------------------------

def _fin_log_solution(x, a=0.1, u_a=1.0, u_1=0.5):
    return u_1 + (u_a - u_1) * np.log(x) / np.log(a)


def test_zero_biot_fin_solution_matches_the_logarithmic_profile():
    sol = solve_fin_fd(np.zeros(16), n_nodes=4097)
    assert np.max(np.abs(sol.values - _fin_log_solution(sol.grid))) <= 1e-5


def test_fin_discretization_error_decays_at_second_order():
    errors = []
    for n in (129, 257):
        sol = solve_fin_fd(np.zeros(16), n_nodes=n)
        errors.append(np.max(np.abs(sol.values - _fin_log_solution(sol.grid))))
    assert 3.4 < errors[0] / errors[1] < 4.7


def test_equal_end_temperatures_give_a_constant_fin_profile():
    sol = solve_fin_fd(np.zeros(16), u_a=0.7, u_1=0.7, n_nodes=65)
    assert_allclose(sol.values, np.full(65, 0.7), atol=1e-11)


def test_fin_solver_validates_radius_and_resolution():
    with pytest.raises(ValueError, match="positive"):
        solve_fin_fd(np.zeros(16), a=0.0)
    with pytest.raises(ValueError, match="outer"):
        solve_fin_fd(np.zeros(16), a=1.2)
    with pytest.raises(ValueError, match="n_nodes"):
        solve_fin_fd(np.zeros(16), n_nodes=2)


# -- grid solutions --------------------------------------------------------

def test_grid_solution_interpolates_inside_and_rejects_outside():
    sol = GridSolution(grid=np.linspace(0.0, 1.0, 11),
                       values=2.0 * np.linspace(0.0, 1.0, 11) + 1.0)
    assert sol.spacing == 0.1
    assert_allclose(sol.interpolate([0.05, 0.55]), [1.1, 2.1], rtol=1e-15)
    with pytest.raises(ValueError, match="outside"):
        sol.interpolate([1.5])


def test_grid_solution_validates_shape_monotonicity_and_finiteness():
    with pytest.raises(ValueError, match="matching"):
        GridSolution(grid=np.zeros((2, 2)), values=np.zeros(4))
    with pytest.raises(ValueError, match="increasing"):
        GridSolution(grid=np.array([0.0, 0.0, 1.0]), values=np.zeros(3))
    with pytest.raises(NumericalError, match="finite"):
        GridSolution(grid=np.array([0.0, 1.0]),
                     values=np.array([0.0, np.nan]))


def test_grid_solution_round_trips_exactly_through_csv(tmp_path):
    rng = np.random.default_rng(0)
    sol = GridSolution(grid=np.sort(rng.random(20)) + np.arange(20),
                       values=rng.normal(size=20), problem_id="fin",
                       theta=np.arange(16.0), metadata={"solver": "fin_fd"})
    path = tmp_path / "reference.csv"
    sol.save(path)
    loaded = GridSolution.load(path)
    assert_array_equal(loaded.grid, sol.grid)
    assert_array_equal(loaded.values, sol.values)
    assert loaded.problem_id == "fin"
    assert_array_equal(loaded.theta, sol.theta)
    assert loaded.metadata == {"solver": "fin_fd"}


# -- electrode current extraction ------------------------------------------

def _dense_voltammetry_surrogate(seed=0, zero=False):
    problem = voltammetry_pde()
    net = init_dense([3, 10, 1], seed=seed)
    if zero:
        net = DenseNetwork(weights=[np.zeros_like(W) for W in net.weights],
                           biases=[np.zeros_like(b) for b in net.biases])
    return SurrogateModel(problem=problem, kind="pde_dense", parametric=True,
                          domain=problem.domain,
                          param_domain=problem.param_domain,
                          config=TrainConfig(), metadata={}, u_net=net)


def test_flat_concentration_field_carries_zero_current():
    model = _dense_voltammetry_surrogate(zero=True)
    t = np.linspace(0.0, 20.0, 7)
    assert_array_equal(surrogate_current(model, t, 0.0), np.zeros(7))


def test_single_basis_current_matches_the_gaussian_derivative():
    problem = voltammetry_pde()
    raw = np.array([1.7, -0.95, 0.1, -0.9, -0.5])
    head_net = DenseNetwork(weights=[np.zeros((5, 1))], biases=[raw.copy()])
    head = RbfHead(net=head_net, k=1, domain=problem.domain)
    model = SurrogateModel(problem=problem, kind="pde_rbf", parametric=True,
                           domain=problem.domain,
                           param_domain=problem.param_domain,
                           config=TrainConfig(), metadata={}, head=head)
    coeffs, means, scales = split_head_outputs(raw[None, :],
                                               problem.domain.bounds)
    c = coeffs[0, 0]
    mx, mt = means[0, 0]
    sx, st = scales[0, 0]
    t = np.linspace(0.0, 20.0, 9)
    gauss = c * np.exp(-(mx ** 2 / sx ** 2 + (t - mt) ** 2 / st ** 2))
    expected = gauss * 2.0 * mx / sx ** 2
    assert_allclose(surrogate_current(model, t, 0.0), expected, rtol=1e-12)


def test_current_agrees_with_finite_differences_of_the_field():
    model = _dense_voltammetry_surrogate(seed=3)
    net = model.u_net
    rng = np.random.default_rng(4)
    h = 1e-3
    for t, e0 in zip(rng.uniform(0.0, 20.0, 100), rng.uniform(-6.0, 6.0, 100)):
        def field(x):
            return net.eval(np.array([(x - 100.0) / 100.0, (t - 10.0) / 10.0,
                                      e0 / 6.0]))[0]
        fd = (field(h) - field(-h)) / (2.0 * h)
        assert_rel_close(np.array([model.current(t, e0)]), np.array([fd]),
                         1e-5, f"current at (t, E0) = ({t}, {e0})")


def test_current_extraction_rejects_foreign_surrogates_and_outside_times():
    model = _dense_voltammetry_surrogate()
    with pytest.raises(ValueError, match="domain"):
        surrogate_current(model, np.array([25.0]), 0.0)
    fin = fin_problem()
    other = SurrogateModel(problem=fin, kind="pde_dense", parametric=False,
                           domain=fin.domain, param_domain=fin.param_domain,
                           config=TrainConfig(), metadata={},
                           u_net=init_dense([1, 4, 1], seed=0))
    with pytest.raises(ValueError, match="voltammetry"):
        surrogate_current(other, np.array([0.5]), 0.0)


# -- synthetic data --------------------------------------------------------

def _line_solution(problem_id=""):
    grid = np.linspace(0.0, 1.0, 101)
    return GridSolution(grid=grid, values=2.0 * grid + 1.0,
                        problem_id=problem_id)


def test_noise_free_samples_lie_exactly_on_the_curve():
    rng = np.random.default_rng(5)
    data = gen_synthetic_data(_line_solution(), 50, 0.0, rng)
    assert_allclose(data.z, 2.0 * data.x[:, 0] + 1.0, rtol=1e-14)
    assert np.all((data.x[:, 0] >= 0.0) & (data.x[:, 0] <= 1.0))


def test_placement_defaults_to_equidistant_only_for_the_fin_problem():
    rng = np.random.default_rng(6)
    fin = gen_synthetic_data(_line_solution("fin"), 9, 0.0, rng)
    assert_array_equal(fin.x[:, 0], np.linspace(0.0, 1.0, 9))
    other = gen_synthetic_data(_line_solution(), 9, 0.0,
                               np.random.default_rng(6))
    assert not np.array_equal(other.x[:, 0], np.linspace(0.0, 1.0, 9))


def test_noise_standard_deviation_matches_the_requested_sigma():
    rng = np.random.default_rng(7)
    n = 100_000
    data = gen_synthetic_data(_line_solution(), n, 0.1, rng)
    resid = data.z - (2.0 * data.x[:, 0] + 1.0)
    assert abs(resid.std() - 0.1) < 3.0 * 0.1 / np.sqrt(2.0 * n)
    assert abs(resid.mean()) < 3.0 * 0.1 / np.sqrt(n)


def test_surrogate_sources_sample_the_prediction_at_theta():
    model = _dense_voltammetry_surrogate(seed=8)
    rng = np.random.default_rng(9)
    data = gen_synthetic_data(model, 20, 0.0, rng, theta=[1.5])
    assert_array_equal(data.z, model.predict(data.x[:, 0], [1.5]))
    with pytest.raises(ValueError, match="theta"):
        gen_synthetic_data(model, 5, 0.0, rng)


def test_data_generation_validates_sigma_points_and_placement():
    rng = np.random.default_rng(10)
    with pytest.raises(ValueError, match="sigma"):
        gen_synthetic_data(_line_solution(), 5, -0.1, rng)
    with pytest.raises(ValueError, match="n_points"):
        gen_synthetic_data(_line_solution(), 0, 0.1, rng)
    with pytest.raises(ValueError, match="placement"):
        gen_synthetic_data(_line_solution(), 5, 0.1, rng, placement="sobol")


def test_datasets_round_trip_exactly_with_their_metadata(tmp_path):
    rng = np.random.default_rng(11)
    data = gen_synthetic_data(_line_solution(), 25, 0.05, rng)
    path = tmp_path / "dataset.csv"
    write_dataset(data, path, meta={"sigma_true": 0.05, "seed": 11})
    loaded, meta = read_dataset(path)
    assert_array_equal(loaded.x, data.x)
    assert_array_equal(loaded.z, data.z)
    assert meta == {"sigma_true": 0.05, "seed": 11}
