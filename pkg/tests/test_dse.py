import itertools

import numpy as np
import pytest

from gnnforge.dse import (
    DseQuery,
    ForestPredictor,
    SurrogatePredictor,
    parse_space,
    run_dse,
    time_dse,
)
from gnnforge.perf import (
    LISTING_SPACE,
    DesignConfig,
    build_surrogate_database,
    design_space_size,
    estimate_design,
    fit_random_forest,
)

SMALL_SPACE = {
    "conv": ["gcn", "pna"],
    "gnn_hidden_dim": [64, 256],
    "gnn_out_dim": [64],
    "gnn_num_layers": [1, 3],
    "skip": [True],
    "mlp_hidden_dim": [64],
    "mlp_num_layers": [1, 2],
    "gnn_p_hidden": [2, 8],
    "gnn_p_out": [2],
    "mlp_p_in": [2],
    "mlp_p_hidden": [2, 8],
}  # 2*2*2*2*2*2 * ... = 64 configs


def brute_force_best(space, budget):
    """Independent full enumeration with the surrogate."""
    fields = list(space)
    best = None
    for combo in itertools.product(*(space[f] for f in fields)):
        cfg = DesignConfig(**dict(zip(fields, combo)))
        est = estimate_design(cfg)
        if est.bram_18k > budget:
            continue
        key = (est.latency_cycles, cfg.key())
        if best is None or key < best[0]:
            best = (key, cfg, est)
    return best


class TestRunDse:
    def test_two_config_forced_choice(self):
        space = dict(SMALL_SPACE)
        space.update(
            {f: [v[0]] for f, v in SMALL_SPACE.items()}
        )
        space["gnn_hidden_dim"] = [64, 256]
        ests = {
            h: estimate_design(
                DesignConfig(**{**{f: v[0] for f, v in SMALL_SPACE.items()},
                                "gnn_hidden_dim": h})
            )
            for h in (64, 256)
        }
        budget = ests[256].bram_18k - 1  # excludes the bigger design
        assert ests[64].bram_18k <= budget
        q = DseQuery(space=space, bram_budget=budget,
                     predictor=SurrogatePredictor())
        result = run_dse(q)
        assert result.best.gnn_hidden_dim == 64

    def test_exhaustive_matches_bruteforce(self):
        budget = 2000
        q = DseQuery(space=SMALL_SPACE, bram_budget=budget,
                     predictor=SurrogatePredictor())
        result = run_dse(q)
        want = brute_force_best(SMALL_SPACE, budget)
        assert result.best == want[1]
        assert result.estimate == want[2]

    def test_saturated_sampling_equals_exhaustive(self):
        size = design_space_size(SMALL_SPACE)
        q_ex = DseQuery(space=SMALL_SPACE, bram_budget=3000,
                        predictor=SurrogatePredictor())
        q_s = DseQuery(space=SMALL_SPACE, bram_budget=3000,
                       predictor=SurrogatePredictor(),
                       strategy="sample", sample_n=size, seed=1)
        assert run_dse(q_s).best == run_dse(q_ex).best

    def test_infeasible_everywhere_empty_result(self):
        q = DseQuery(space=SMALL_SPACE, bram_budget=1,
                     predictor=SurrogatePredictor())
        result = run_dse(q)
        assert result.best is None
        assert result.estimate is None
        assert result.evaluated == design_space_size(SMALL_SPACE)

    def test_determinism(self):
        q = DseQuery(space=SMALL_SPACE, bram_budget=2500,
                     predictor=SurrogatePredictor(),
                     strategy="sample", sample_n=20, seed=3)
        a, b = run_dse(q), run_dse(q)
        assert a.best == b.best and a.evaluated == b.evaluated
        assert [c.key() for c, _ in a.pareto] == [c.key() for c, _ in b.pareto]

    def test_soundness_budget(self):
        for budget in (800, 1500, 3000):
            q = DseQuery(space=SMALL_SPACE, bram_budget=budget,
                         predictor=SurrogatePredictor())
            result = run_dse(q)
            if result.best is not None:
                assert result.estimate.bram_18k <= budget

    def test_pareto_correctness(self):
        q = DseQuery(space=SMALL_SPACE, bram_budget=10_000,
                     predictor=SurrogatePredictor())
        result = run_dse(q)
        assert result.best is not None
        # best appears on the front
        assert any(c == result.best for c, _ in result.pareto)
        # no member dominated by any evaluated config
        all_points = [
            estimate_design(DesignConfig(**dict(zip(SMALL_SPACE, combo))))
            for combo in itertools.product(*SMALL_SPACE.values())
        ]
        for _, est in result.pareto:
            for other in all_points:
                dominates = (
                    other.latency_cycles <= est.latency_cycles
                    and other.bram_18k <= est.bram_18k
                    and (
                        other.latency_cycles < est.latency_cycles
                        or other.bram_18k < est.bram_18k
                    )
                )
                assert not dominates

    def test_forest_predictor(self):
        db = build_surrogate_database(100, seed=0)
        lat = fit_random_forest(db, "latency", seed=0)
        bram = fit_random_forest(db, "bram", seed=0)
        q = DseQuery(space=SMALL_SPACE, bram_budget=5000,
                     predictor=ForestPredictor(lat, bram))
        result = run_dse(q)
        assert result.best is not None
        assert result.estimate.bram_18k <= 5000

    def test_bad_query(self):
        with pytest.raises(ValueError):
            DseQuery(space=SMALL_SPACE, bram_budget=0,
                     predictor=SurrogatePredictor())
        with pytest.raises(ValueError):
            DseQuery(space=SMALL_SPACE, bram_budget=10,
                     predictor=SurrogatePredictor(), strategy="sample")


class TestTimeDse:
    def test_single_eval(self):
        space = {f: [v[0]] for f, v in LISTING_SPACE.items()}
        q = DseQuery(space=space, bram_budget=100_000,
                     predictor=SurrogatePredictor())
        report = time_dse(q)
        assert report["result"].evaluated == 1
        assert report["per_eval_seconds"] == pytest.approx(
            report["total_seconds"], rel=1e-6
        )

    def test_report_serializable(self):
        import json

        q = DseQuery(space=SMALL_SPACE, bram_budget=2000,
                     predictor=SurrogatePredictor())
        report = time_dse(q)
        payload = {
            "total_seconds": report["total_seconds"],
            "per_eval_seconds": report["per_eval_seconds"],
            "result": report["result"].to_dict(),
        }
        json.dumps(payload)


class TestParseSpace:
    def test_defaults_fill_missing(self):
        space = parse_space({"conv": ["gcn"]})
        assert space["conv"] == ["gcn"]
        assert space["gnn_hidden_dim"] == LISTING_SPACE["gnn_hidden_dim"]

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError):
            parse_space({"frequency": [100]})

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            parse_space({"conv": []})
