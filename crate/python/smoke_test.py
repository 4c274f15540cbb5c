"""Smoke test for the neutralized_entropy extension module."""

import math

import neutralized_entropy as ne


def main():
    full3 = ne.Shift.full(3)
    assert full3.count_words(10) == 3**10
    assert ne.ball_cylinder_length(10, 0.5, 3) == 10 + math.floor(10 * 0.5 / math.log(3))

    est = ne.critical_exponent(full3, ne.Subset.whole(), 0.2, n_min=50, n_max=400)
    assert est["converged"], est
    assert abs(est["s_star"] - (math.log(3) + 0.2)) < 0.05, est

    golden = ne.bowen_entropy(ne.Shift.full(2), ne.Subset.golden_mean(), [0.4, 0.2, 0.1])
    phi = (1 + math.sqrt(5)) / 2
    assert abs(golden["extrapolated"] - math.log(phi)) / math.log(phi) < 0.02, golden

    mu = ne.Measure.uniform(3)
    bk = ne.brin_katok_entropy(mu, 0.25, [50, 100, 200, 400])
    assert abs(bk["per_order"][-1] - ne.ball_cylinder_length(400, 0.25, 3, "closed") * math.log(3) / 400) < 1e-12

    cost = ne.log_cover_cost(full3, ne.Subset.whole(), 0.3, 5, 20, 1.5)
    flow = ne.frostman(full3, ne.Subset.whole(), 0.3, 5, 20, 1.5)
    assert abs(cost - flow.log_total_mass) < 1e-9
    assert flow.violations == 0

    assert ne.min_spanning_count(full3, 2, 1.0) == 3 ** ne.ball_cylinder_length(2, 1.0, 3, "closed")

    katok = ne.katok_entropy(ne.Shift.full(2), ne.Measure.bernoulli([0.75, 0.25]), 0.4, [0.1, 0.01], n_min=20, n_max=80)
    assert len(katok["rows"]) == 2

    try:
        ne.Shift.full(1)
    except ValueError:
        pass
    else:
        raise AssertionError("alphabet 1 accepted")

    code, records = ne.run(
        "entropy",
        '[system]\nalphabet = 2\nkind = "full"\n[compute]\nepsilon = [0.3]\nn_min = 10\nn_max = 40\n',
    )
    assert code == 0 and records[0]["quantity"] == "bowen_entropy", records

    print("smoke test passed")


if __name__ == "__main__":
    main()
