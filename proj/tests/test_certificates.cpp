#include <doctest.h>

#include <cmath>
#include <limits>

#include "vicert/certificates.hpp"
#include "vicert/problem.hpp"
#include "vicert/stopping.hpp"
#include "support.hpp"

using namespace vicert;

namespace {

ControlProblem cubic() { return make_cubic_integrator(); }

// Sector constants of the cubic integrator: a_v_bar = 14, a_w = 1. The
// closed forms below are frozen from those two numbers alone so a silent
// change in the declared envelope breaks a test, not just a bound.
constexpr double kEpsStar = 1.0 / 14.0;

ViRun chain_run(double eps) {
    const ControlProblem p = testing::shift_chain();
    return run_until_stop(p, testing::chain_states(), testing::chain_inputs(),
                          uniform_criterion(eps), testing::snapped_options());
}

} // namespace

TEST_CASE("near optimality bound pushes the tolerance through the envelope") {
    const ControlProblem p = cubic();
    const std::vector<double> x{1.0, 2.0};

    const NearOptimalityBound b = near_optimality_bound(p, uniform_criterion(0.01), x);
    CHECK(b.value == doctest::Approx(0.14).epsilon(1e-12));
    REQUIRE(b.linear.has_value());
    CHECK(*b.linear == doctest::Approx(b.value).epsilon(1e-12));

    // Relative tolerance scales with sigma(x) = |1|^3 + |2| = 3.
    const NearOptimalityBound br = near_optimality_bound(p, relative_criterion(0.01), x);
    CHECK(br.value == doctest::Approx(14.0 * 0.03).epsilon(1e-12));

    CHECK(near_optimality_bound_from_cstop(p, 0.0).value == 0.0);
    CHECK_THROWS_AS(near_optimality_bound_from_cstop(p, -1e-9), DomainError);
}

TEST_CASE("stability threshold and overshoot come from the sector constants") {
    const ControlProblem p = cubic();
    CHECK(epsilon_star_global(p) == doctest::Approx(kEpsStar).epsilon(1e-15));
    CHECK(overshoot_gain(p) == 14.0);

    ControlProblem bare = testing::shift_chain();
    bare.sector.reset();
    CHECK_THROWS_AS(epsilon_star_global(bare), CertificateUnavailable);
    CHECK_THROWS_AS(overshoot_gain(bare), CertificateUnavailable);

    ControlProblem bounded = testing::shift_chain();
    bounded.sector->range_limit = 5.0;
    CHECK_THROWS_AS(epsilon_star_global(bounded), CertificateUnavailable);
}

TEST_CASE("decay base and envelope contract below the threshold") {
    const ControlProblem p = cubic();

    CHECK(decay_base(p, 0.0) == doctest::Approx(13.0 / 14.0).epsilon(1e-15));
    CHECK(decay_base(p, 0.01) == doctest::Approx(1.0 - 0.86 / 14.0).epsilon(1e-15));
    CHECK_THROWS_AS(decay_base(p, kEpsStar), RangeError);
    CHECK_THROWS_AS(decay_base(p, 1.0), RangeError);
    CHECK_THROWS_AS(decay_base(p, -0.01), DomainError);

    CHECK(decay_envelope(p, 0.01, 1.0, 0) == doctest::Approx(14.0).epsilon(1e-15));
    CHECK(decay_envelope(p, 0.01, 1.0, 1) == doctest::Approx(13.14).epsilon(1e-12));
    CHECK(decay_envelope(p, 0.01, 0.0, 3) == 0.0);
    CHECK_THROWS_AS(decay_envelope(p, 0.01, 1.0, -1), DomainError);
    CHECK_THROWS_AS(decay_envelope(p, 0.01, -1.0, 1), DomainError);
}

TEST_CASE("running cost gap diverges at the stability threshold") {
    const ControlProblem p = cubic();
    CHECK(running_cost_gap(p, 0.0) == 0.0);
    // a_v_bar^3 / a_w * eps / (a_w^2 - a_v_bar eps) at eps = 0.05:
    // 2744 * 0.05 / 0.3.
    CHECK(running_cost_gap(p, 0.05) == doctest::Approx(2744.0 * 0.05 / 0.3).epsilon(1e-12));
    CHECK(running_cost_gap(p, 0.05) == doctest::Approx(457.333333333).epsilon(1e-9));
    CHECK_THROWS_AS(running_cost_gap(p, kEpsStar), RangeError);
    CHECK_THROWS_AS(running_cost_gap(p, 0.2), RangeError);
    CHECK_THROWS_AS(running_cost_gap(p, -1e-3), DomainError);
}

TEST_CASE("conservative horizon counts contraction steps") {
    const ControlProblem p = cubic();
    CHECK(conservative_horizon(p) == 71);

    // Exact boundary: level0 = 4, rate 1/2, so the ratio of logs is the
    // integer 2 and must not wobble off it.
    ControlProblem q = testing::shift_chain();
    q.sector = SectorBounds{2.0, 1.0, std::numeric_limits<double>::infinity()};
    CHECK(conservative_horizon(q, 1.0) == 2);

    CHECK(conservative_horizon(p, 196.0) == 0);
    CHECK(conservative_horizon(p, 500.0) == 0);
    CHECK_THROWS_AS(conservative_horizon(p, 0.0), DomainError);
    CHECK_THROWS_AS(conservative_horizon(p, -1.0), DomainError);

    ControlProblem flat = testing::shift_chain();
    flat.sector = SectorBounds{1.0, 1.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(conservative_horizon(flat), DomainError);
}

TEST_CASE("a priori gap bound agrees between the two routes") {
    const ControlProblem p = cubic();
    for (int d = 0; d <= 100; d += 1) {
        const Theorem1Bound b = theorem1_gap_bound(p, d, 1.0);
        REQUIRE(b.closed_form.has_value());
        const double ref = 196.0 * std::pow(13.0 / 14.0, d);
        CHECK(*b.closed_form == doctest::Approx(ref).epsilon(1e-12));
        CHECK(b.value == doctest::Approx(*b.closed_form).epsilon(1e-9));
    }

    const Theorem1Bound zero = theorem1_gap_bound(p, 5, 0.0);
    CHECK(zero.value == 0.0);
    REQUIRE(zero.closed_form.has_value());
    CHECK(*zero.closed_form == 0.0);

    CHECK_THROWS_AS(theorem1_gap_bound(p, -1, 1.0), DomainError);
    CHECK_THROWS_AS(theorem1_gap_bound(p, 3, -1.0), DomainError);

    // Non-default sector: a_v_bar = 2, a_w = 1/2 gives
    // (4 / 0.5) * (3/4)^2 * 8 = 36 at depth 2.
    ControlProblem q = testing::shift_chain();
    q.alpha_v_bar = MonotoneFn::linear(2.0);
    q.alpha_w = MonotoneFn::linear(0.5);
    q.sector = SectorBounds{2.0, 0.5, std::numeric_limits<double>::infinity()};
    const Theorem1Bound b = theorem1_gap_bound(q, 2, 8.0);
    REQUIRE(b.closed_form.has_value());
    CHECK(*b.closed_form == doctest::Approx(36.0).epsilon(1e-12));
    CHECK(b.value == doctest::Approx(36.0).epsilon(1e-9));
}

TEST_CASE("semiglobal threshold scans the tolerance against the theta majorant") {
    const ControlProblem p = cubic();
    const double cap = 2000.0;

    // With identity alpha_w and linear(14) alpha_v_bar the right-hand side
    // evaluates to delta_practical / 378 and the probe sigma to 14 * cap.
    const auto rel = epsilon_star_semiglobal(p, relative_criterion(0.5), cap, 1.0);
    REQUIRE(rel.has_value());
    CHECK(*rel == doctest::Approx(1.0 / 10584000.0).epsilon(1e-6));

    const auto mixed = epsilon_star_semiglobal(p, mixed_min_criterion(0.5), cap, 1.0);
    REQUIRE(mixed.has_value());
    CHECK(*mixed == doctest::Approx(1.0 / 378.0).epsilon(1e-6));

    const auto uni = epsilon_star_semiglobal(p, uniform_criterion(0.5), cap, 1.0);
    REQUIRE(uni.has_value());
    CHECK(*uni == doctest::Approx(1.0 / 378.0).epsilon(1e-6));

    // Shrinking the practical ball below what the bracket bottom can meet
    // yields no certificate rather than a bogus tiny threshold.
    CHECK_FALSE(epsilon_star_semiglobal(p, relative_criterion(0.5), cap, 1e-11).has_value());

    CHECK_THROWS_AS(
        epsilon_star_semiglobal(p, quadratic_form_criterion({1.0, 0.0, 0.0, 1.0}, 2, {0.1}),
                                cap, 1.0),
        CertificateUnavailable);
    CHECK_THROWS_AS(epsilon_star_semiglobal(p, relative_criterion(0.5), cap, 0.0), DomainError);
    CHECK_THROWS_AS(epsilon_star_semiglobal(p, relative_criterion(0.5), cap, cap + 1.0),
                    DomainError);
}

TEST_CASE("sandwich audit is exact on the snapped chain") {
    const ControlProblem p = testing::shift_chain();
    const ViRun run = chain_run(0.0625);
    const ViRun long_run = chain_run(0.0);
    REQUIRE(run.d == 2);
    REQUIRE(long_run.d == 2);

    const SandwichCheck s = sandwich_check(p, run, long_run, 0);
    // V_2 / sigma peaks at 1.125 on the chain, well under the declared 14.
    CHECK(s.a_v_hat == 1.125);
    CHECK(s.dominance_ok);
    CHECK(s.violations == 0);
    CHECK(s.max_excess == 0.0);

    CHECK_THROWS_AS(sandwich_check(p, run, long_run, 20), DomainError);

    const ViRun other = run_until_stop(p, StateGrid(std::vector<AxisSpec>{{-1.0, 1.0, 3}}),
                                       testing::chain_inputs(), uniform_criterion(0.0625),
                                       testing::snapped_options());
    CHECK_THROWS_AS(sandwich_check(p, run, other, 0), DomainError);
}

TEST_CASE("lyapunov audit accepts the certified chain trajectory") {
    const ControlProblem p = testing::shift_chain();
    const ViRun run = chain_run(0.0625);
    const ViRun long_run = chain_run(0.0);

    const std::vector<std::vector<double>> traj{{1.0}, {0.0}, {0.0}};
    const LyapunovReport rep = lyapunov_decrease_check(p, run, long_run, traj, 0);
    CHECK(rep.d_long == 2);
    CHECK(rep.violations == 0);
    REQUIRE(rep.terms.size() == 2);
    CHECK(rep.terms[0].y_curr == 1.125);
    CHECK(rep.terms[0].y_next == 0.0);
    CHECK(rep.terms[0].alpha_w_sigma == 1.0);
    CHECK(rep.terms[0].v_eps == doctest::Approx(14.0 * 0.0625).epsilon(1e-12));
    CHECK(rep.terms[0].slack < 0.0);
    CHECK(rep.terms[1].slack < 0.0);

    CHECK(lyapunov_decrease_check(p, run, long_run, {{1.0}}, 0).terms.empty());
    CHECK_THROWS_AS(lyapunov_decrease_check(p, run, long_run,
                                            {{1.0, 2.0}, {0.0, 0.0}}, 0),
                    DomainError);
    CHECK_THROWS_AS(lyapunov_decrease_check(p, run, long_run, traj, 20), DomainError);
}

TEST_CASE("certificate report gathers the applicable branches") {
    const ControlProblem p = cubic();
    const StateGrid states = testing::cubic_states_small();
    const InputGrid inputs = testing::cubic_inputs_small();

    SUBCASE("relative tolerance below the threshold is fully certified") {
        const ViRun run = run_until_stop(p, states, inputs, relative_criterion(0.01),
                                         testing::snapped_options());
        REQUIRE(run.stopped);
        const CertificateReport r = build_certificate_report(p, run);
        CHECK(r.problem == p.name);
        CHECK(r.criterion == "relative");
        CHECK(r.sector_available);
        CHECK(r.theta_available);
        REQUIRE(r.eps_star_global_value.has_value());
        CHECK(*r.eps_star_global_value == doctest::Approx(kEpsStar).epsilon(1e-15));
        REQUIRE(r.overshoot.has_value());
        CHECK(*r.overshoot == 14.0);
        REQUIRE(r.conservative_horizon_value.has_value());
        CHECK(*r.conservative_horizon_value == 71);
        CHECK(r.exponential_applicable);
        REQUIRE(r.decay_base_value.has_value());
        CHECK(*r.decay_base_value == doctest::Approx(decay_base(p, 0.01)).epsilon(1e-15));
        REQUIRE(r.running_cost_gap_value.has_value());
        CHECK(r.semiglobal_attempted);
        CHECK_FALSE(r.semiglobal_no_certificate);
        CHECK(r.eps_star_semiglobal_value.has_value());
        CHECK(r.v_eps_min >= 0.0);
        CHECK(r.v_eps_max >= r.v_eps_mean);
        CHECK(r.v_eps_mean >= r.v_eps_min);
        REQUIRE(r.v_eps_linear_max.has_value());
        CHECK(*r.v_eps_linear_max == doctest::Approx(r.v_eps_max).epsilon(1e-9));

        const nlohmann::json j = r.to_json();
        CHECK(j["problem"] == p.name);
        CHECK(j["criterion"]["kind"] == "relative");
        CHECK(j["exponential"]["applicable"] == true);
        CHECK(j["exponential"].contains("decay_base"));
        CHECK(j["exponential"].contains("running_cost_gap"));
        CHECK(j["semiglobal"]["attempted"] == true);
        CHECK(j["semiglobal"].contains("eps_star"));
        CHECK(j["tolerance_floor"]["kind"] == "linear");
        CHECK(j.contains("eps_star_global"));
        CHECK(j.contains("overshoot"));
        CHECK(j["conservative_horizon"] == 71);
    }

    SUBCASE("uniform tolerance is refused for the decay certificate") {
        const ViRun run = run_until_stop(p, states, inputs, uniform_criterion(0.01),
                                         testing::snapped_options());
        const CertificateReport r = build_certificate_report(p, run);
        CHECK_FALSE(r.exponential_applicable);
        CHECK(r.exponential_reason.find("does not vanish linearly") != std::string::npos);
        CHECK_FALSE(r.decay_base_value.has_value());
        CHECK(r.floor.kind == FloorKind::Constant);
        const nlohmann::json j = r.to_json();
        CHECK(j["exponential"]["applicable"] == false);
        CHECK(j["exponential"].contains("reason"));
        CHECK(j["tolerance_floor"]["kind"] == "constant");
    }

    SUBCASE("tolerance at or above the threshold is refused") {
        const ViRun run = run_until_stop(p, states, inputs, relative_criterion(0.08),
                                         testing::snapped_options());
        const CertificateReport r = build_certificate_report(p, run);
        CHECK_FALSE(r.exponential_applicable);
        CHECK(r.exponential_reason.find("not below eps_star") != std::string::npos);
    }

    SUBCASE("zero tolerance collapses the guarantee width to zero") {
        const ViRun run = run_until_stop(p, states, inputs, uniform_criterion(0.0),
                                         testing::snapped_options());
        const CertificateReport r = build_certificate_report(p, run);
        CHECK(r.v_eps_min == 0.0);
        CHECK(r.v_eps_mean == 0.0);
        CHECK(r.v_eps_max == 0.0);
    }

    SUBCASE("missing sector constants disable every sector-backed branch") {
        const ViRun run = run_until_stop(p, states, inputs, relative_criterion(0.01),
                                         testing::snapped_options());
        ControlProblem bare = cubic();
        bare.sector.reset();
        const CertificateReport r = build_certificate_report(bare, run);
        CHECK_FALSE(r.sector_available);
        CHECK_FALSE(r.eps_star_global_value.has_value());
        CHECK_FALSE(r.overshoot.has_value());
        CHECK_FALSE(r.conservative_horizon_value.has_value());
        CHECK_FALSE(r.v_eps_linear_max.has_value());
        CHECK_FALSE(r.exponential_applicable);
        CHECK(r.exponential_reason == "no infinite-range sector constants");
    }

    SUBCASE("a run with no completed backup is rejected") {
        ViRun empty;
        CHECK_THROWS_AS(build_certificate_report(p, empty), DomainError);
    }
}
