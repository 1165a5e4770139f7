import itertools

import numpy as np
import pytest

from qdemon.experiments import (
    GROUPS,
    PHI_1,
    PHI_2,
    PHI_DA,
    ExperimentError,
    Step,
    budget_scale,
    evolve,
    ideal_stage_state,
    ideal_target,
    information_acquired,
    initial_state,
    program,
    rho_ecn,
    run_experiment,
    run_experiment1,
    run_experiment2,
    run_experiment3,
    simulate_stages,
    stages_of,
)
from qdemon.gates import apply, parse_gate
from qdemon.noise import NoiseParams, dephasing_channel, exp3_noise_budget, schedule_totals
from qdemon.qmath import (
    DensityMatrix,
    bloch_length,
    bloch_vector,
    fidelity,
    partial_trace,
    reorder,
    von_neumann_entropy,
)
from qdemon.tomography import Calibration, reconstruct

TOL = 1e-9
SQ2 = np.sqrt(2)


def random_noise(rng):
    return NoiseParams(T2=10 ** rng.uniform(-6, -2), T2_star=10 ** rng.uniform(-7, -4),
                       p0=rng.uniform(0.5, 1.0))


class TestExperiment1:
    def test_ideal_table(self):
        t = run_experiment1().table("S")
        expect = {"C": (1, 0, 0), "E": (0, 1, 1), "N": (1, 1, 1), "CN": (2, 1, 1)}
        for group, vals in expect.items():
            got = [t[group][s] for s in ("begin", "step1", "step2")]
            np.testing.assert_allclose(got, vals, atol=TOL)

    def test_fidelities_are_one(self):
        rep = run_experiment1()
        assert all(r.fidelity == pytest.approx(1, abs=TOL) for r in rep.records)

    def test_roles_and_stages(self):
        rep = run_experiment1()
        assert rep.stages == ["begin", "step1", "step2"]
        assert rep.record("begin", "C").role == "particle A"
        assert rep.record("begin", "N").role == "particle B"
        assert rep.record("begin", "E").role == "demon"

    def test_information_acquired(self):
        rep = run_experiment1()
        assert information_acquired(rep, "step1") == pytest.approx(1, abs=TOL)
        assert information_acquired(rep, "step2") == pytest.approx(0, abs=TOL)
        with pytest.raises(ExperimentError):
            information_acquired(rep, "begin")
        with pytest.raises(ExperimentError):
            information_acquired(run_experiment2(), "step1")

    def test_second_law_sweep(self, rng):
        for _ in range(60):
            noise = random_noise(rng)
            st = simulate_stages(1, noise, polarize=bool(rng.integers(2)))
            total = {k: sum(von_neumann_entropy(partial_trace(st[k], [x])) for x in "ECN")
                     for k in ("begin", "step1", "step2")}
            assert total["step1"] >= total["begin"] - TOL
            assert total["step2"] >= total["begin"] - TOL

    def test_decrease_bounded_by_information(self, rng):
        for _ in range(60):
            noise = random_noise(rng)
            rep = run_experiment1(noise, polarize=bool(rng.integers(2)))
            dS = rep.entropy("begin", "C") - rep.entropy("step1", "C")
            assert dS <= information_acquired(rep, "step1") + TOL

    def test_bound_under_mid_readout_dephasing(self, rng):
        # dephase the demon between readout and feedback at an arbitrary strength
        for lam in rng.uniform(0, 1, 30):
            rho0 = initial_state(1)
            after_read = apply(rho0, parse_gate("C_C-NOT_E"))
            info = von_neumann_entropy(partial_trace(after_read, ["E"]))
            out = apply(apply(after_read, dephasing_channel(lam, "E")), parse_gate("C_E-NOT_C"))
            dS = 1 - von_neumann_entropy(partial_trace(out, ["C"]))
            assert dS <= info + TOL


class TestExperiment2:
    def test_diagonal(self):
        rep = run_experiment2(basis="diagonal")
        assert rep.entropy("final", "C") == pytest.approx(1, abs=TOL)
        assert rep.entropy("begin", "C") == pytest.approx(1, abs=TOL)
        assert rep.detection_basis == "diagonal"

    def test_off_diagonal(self):
        rep = run_experiment2(basis="off-diagonal")
        assert rep.entropy("final", "C") == pytest.approx(0, abs=TOL)
        assert rep.entropy("final", "E") == pytest.approx(1, abs=TOL)
        plus = DensityMatrix(np.full((2, 2), 0.5), ["C"])
        final = partial_trace(simulate_stages(2)["final"], ["C"])
        assert fidelity(plus, final) == pytest.approx(1, abs=TOL)
        assert rep.record("final", "C").fidelity == pytest.approx(1, abs=TOL)

    def test_demon_coherence_scales_system_bloch(self, rng):
        for lam in rng.uniform(0, 1, 20):
            steps = program(2, basis="off-diagonal")
            spliced = [steps[0], Step(mark="prep")] + steps[1:]
            rho = initial_state(2)
            st = evolve(spliced[:2], rho)
            rho = apply(st["prep"], dephasing_channel(lam, "E"))
            final = evolve(spliced[2:], rho)["final"]
            c = partial_trace(final, ["C"])
            assert bloch_length(c) == pytest.approx(lam, abs=1e-12)
            np.testing.assert_allclose(bloch_vector(c), [lam, 0, 0], atol=1e-12)

    def test_bad_basis(self):
        with pytest.raises(ExperimentError):
            run_experiment2(basis="sideways")


class TestExperiment3:
    def test_post_demon_state(self):
        st = simulate_stages(3, observer="inside")
        assert fidelity(rho_ecn(), st["demon"]) == pytest.approx(1, abs=TOL)
        np.testing.assert_allclose(st["demon"].data, rho_ecn().data, atol=1e-12)

    def test_begin_state(self):
        st = simulate_stages(3)
        expect = reorder(DensityMatrix(np.kron(PHI_DA.to_density().data, np.eye(2) / 2), ("E", "N", "C")),
                         ("E", "C", "N"))
        np.testing.assert_allclose(st["begin"].data, expect.data, atol=1e-12)

    def test_outside_marginals_maximally_mixed(self):
        st = simulate_stages(3, observer="outside")["final"]
        for x in "EC":
            assert np.max(np.abs(partial_trace(st, [x]).data - np.eye(2) / 2)) <= 1e-12
        rep = run_experiment3(observer="outside")
        assert rep.stages == ["begin", "final"]
        assert rep.entropy("final", "E") == pytest.approx(1, abs=TOL)
        assert rep.entropy("final", "C") == pytest.approx(1, abs=TOL)

    def test_inside_observer(self):
        rep = run_experiment3(observer="inside")
        assert rep.stages == ["begin", "demon", "final"]
        assert rep.entropy("final", "E") == pytest.approx(0, abs=TOL)
        assert rep.entropy("final", "C") == pytest.approx(0, abs=TOL)
        assert rep.entropy("final", "N") == pytest.approx(1, abs=TOL)

    def test_joint_entropy_rises(self):
        rep = run_experiment3(observer="inside")
        assert rep.entropy("begin", "EN") == pytest.approx(0, abs=TOL)
        assert rep.entropy("demon", "EN") == pytest.approx(2, abs=TOL)

    def test_individual_sum_accounting(self):
        rep = run_experiment3(observer="inside")
        total = {s: sum(rep.entropy(s, x) for x in "ECN") for s in rep.stages}
        assert total["begin"] == pytest.approx(3, abs=TOL)
        assert total["demon"] == pytest.approx(3, abs=TOL)
        assert total["final"] == pytest.approx(1, abs=TOL)
        # demon plus system alone drops by two bits
        assert rep.entropy("demon", "E") + rep.entropy("demon", "C") == pytest.approx(2, abs=TOL)
        assert rep.entropy("final", "E") + rep.entropy("final", "C") == pytest.approx(0, abs=TOL)

    def test_written_final_state_equivalent(self):
        # |-1>_E (|up>+|down>)/sqrt2 (x) I/2 differs from the simulated state
        # only by local unitaries on E and C
        final = simulate_stages(3, observer="inside")["final"]
        plus = np.full((2, 2), 0.5)
        written = DensityMatrix(np.kron(np.kron(np.diag([0, 1]), plus), np.eye(2) / 2), ("E", "C", "N"))
        local = np.kron(np.kron(np.array([[0, 1], [1, 0]]), np.diag([1, 1j])), np.eye(2))
        np.testing.assert_allclose(local @ final.data @ local.conj().T, written.data, atol=1e-12)
        for r in (1, 2):
            for keep in itertools.combinations("ECN", r):
                assert von_neumann_entropy(partial_trace(final, keep)) == pytest.approx(
                    von_neumann_entropy(partial_trace(written, keep)), abs=1e-10)

    def test_branch_states(self):
        np.testing.assert_allclose(PHI_1.amplitudes[[0, 7]], [1 / SQ2, 1j / SQ2])
        np.testing.assert_allclose(PHI_2.amplitudes[[3, 4]], [1 / SQ2, 1j / SQ2])

    def test_schedule_hits_budget(self):
        p = NoiseParams()
        kp, kf = budget_scale(p)
        from qdemon.experiments import _timed_gates
        prot, free = schedule_totals(_timed_gates([s for s in program(3) if not s.is_mark]))
        assert prot * kp == pytest.approx(p.protected_time)
        assert free * kf == pytest.approx(p.unprotected_gaps)

    def test_noisy_c_bloch_floor(self):
        # every dephasing channel lands on E; C keeps at least the budget's Bloch length
        rep = run_experiment3(NoiseParams(), observer="inside")
        L = rep.record("final", "C").bloch_length
        assert L >= exp3_noise_budget().L_remaining - 1e-9
        assert rep.entropy("final", "C") <= exp3_noise_budget().S_final + 1e-9

    def test_bad_observer(self):
        with pytest.raises(ExperimentError):
            run_experiment3(observer="nobody")


class TestIdealStates:
    @pytest.mark.parametrize("experiment, kw", [
        (1, {}), (2, {"basis": "diagonal"}), (2, {"basis": "off-diagonal"}),
        (3, {"observer": "inside"}), (3, {"observer": "outside"}),
    ])
    def test_closed_forms_match_gates(self, experiment, kw):
        st = simulate_stages(experiment, **kw)
        for stage in stages_of(experiment, **kw):
            np.testing.assert_allclose(st[stage].data, ideal_stage_state(experiment, stage, **kw).data,
                                       atol=1e-12)

    def test_unknown_stage(self):
        with pytest.raises(ExperimentError):
            ideal_stage_state(1, "final")
        with pytest.raises(ExperimentError):
            program(4)

    def test_pure_targets(self):
        assert ideal_target(3, "begin", "EN").__class__.__name__ == "PureState"
        assert ideal_target(3, "begin", "E").__class__.__name__ == "DensityMatrix"


class TestReports:
    def test_invariants(self, rng):
        for _ in range(5):
            noise = random_noise(rng)
            for exp, kw in ((1, {}), (2, {"basis": "diagonal"}), (3, {"observer": "inside"})):
                rep = run_experiment(exp, noise=noise, **kw)
                for r in rep.records:
                    assert -1e-12 <= r.entropy <= len(r.subsystem) + 1e-12
                    assert 0 <= r.fidelity <= 1

    def test_sampled_deterministic(self):
        a = run_experiment3(NoiseParams(), mode="sampled", seed=3, n_resamples=200)
        b = run_experiment3(NoiseParams(), mode="sampled", seed=3, n_resamples=200)
        assert a.to_dict() == b.to_dict() and a.to_csv() == b.to_csv()
        c = run_experiment3(NoiseParams(), mode="sampled", seed=4, n_resamples=200)
        assert a.to_dict() != c.to_dict()

    def test_sampled_has_intervals(self):
        rep = run_experiment1(mode="sampled", seed=1, n_resamples=200)
        for r in rep.records:
            assert r.entropy_ci is not None and r.fidelity_ci is not None
            assert r.entropy in r.entropy_ci
        assert set(rep.datasets) == {f"{s}/{g}" for s in rep.stages for g in GROUPS[1]}

    def test_sampled_converges_to_analytic(self):
        cal = Calibration(cycles=10 ** 9)
        noise = NoiseParams()
        states = simulate_stages(3, noise, observer="inside")
        fids = []
        for seed in range(5):
            rep = run_experiment3(noise, mode="sampled", observer="inside", seed=seed, calibration=cal)
            for key, ds in rep.datasets.items():
                stage, group = key.split("/")
                exact = reorder(partial_trace(states[stage], tuple(group)), tuple(group))
                fids.append(fidelity(exact, reconstruct(ds)))
        assert np.median(fids) >= 0.999

    def test_csv_shape(self):
        rep = run_experiment3()
        lines = rep.to_csv().strip().split("\n")
        assert lines[0] == ",".join(rep.CSV_FIELDS)
        assert len(lines) == 1 + len(rep.records)

    def test_bad_mode(self):
        with pytest.raises(ExperimentError):
            run_experiment1(mode="guess")
        with pytest.raises(ExperimentError):
            run_experiment(7)
