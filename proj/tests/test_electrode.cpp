#include <cmath>
#include <fstream>
#include <vector>

#include "battdiag/electrode.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace battdiag;

namespace {

// Independent re-statements of the analytic electrode forms, evaluated from
// the exported shape constants.
double pe_reference(double q) {
    const LcoLikeForm f;
    const double curve = f.curve_amp * f.curve_tau * (1.0 - std::exp(-q / f.curve_tau));
    const double dive = f.dive_amp * std::exp((q - f.q_max) / f.dive_tau);
    return f.top - f.lin * q - curve - dive;
}

double ne_reference(double q) {
    const GraphiteLikeForm f;
    double v = f.base + f.ramp * (1.0 - q / f.q_max);
    for (const GraphiteStep& s : f.steps)
        v += s.amp / (1.0 + std::exp((q - s.center) / s.width));
    return v;
}

std::vector<double> valid_q(int n = 20) {
    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) q[i] = 10.0 * i;
    return q;
}

std::vector<double> valid_v(int n = 20) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = 4.0 - 0.01 * i;
    return v;
}

}  // namespace

TEST_CASE("curve construction validates its invariants") {
    CHECK_NOTHROW(ElectrodeCurve::create(Electrode::positive, valid_q(), valid_v(), "ok"));

    SUBCASE("too few samples") {
        CHECK_THROWS_AS(ElectrodeCurve::create(Electrode::positive, valid_q(15),
                                               valid_v(15), "short"),
                        ValidationError);
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(ElectrodeCurve::create(Electrode::positive, valid_q(20),
                                               valid_v(19), "ragged"),
                        ValidationError);
    }
    SUBCASE("q must start at zero") {
        auto q = valid_q();
        q[0] = 0.5;
        CHECK_THROWS_AS(ElectrodeCurve::create(Electrode::positive, q, valid_v(), "x"),
                        ValidationError);
    }
    SUBCASE("q must strictly increase") {
        auto q = valid_q();
        q[5] = q[4];
        CHECK_THROWS_AS(ElectrodeCurve::create(Electrode::positive, q, valid_v(), "x"),
                        ValidationError);
    }
    SUBCASE("v must not increase") {
        auto v = valid_v();
        v[7] = v[6] + 0.001;
        CHECK_THROWS_AS(ElectrodeCurve::create(Electrode::positive, valid_q(), v, "x"),
                        ValidationError);
    }
    SUBCASE("non-finite samples rejected") {
        auto v = valid_v();
        v[3] = std::nan("");
        CHECK_THROWS_AS(ElectrodeCurve::create(Electrode::positive, valid_q(), v, "x"),
                        ValidationError);
        auto q = valid_q();
        q[19] = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(ElectrodeCurve::create(Electrode::positive, q, valid_v(), "x"),
                        ValidationError);
    }
}

TEST_CASE("synthetic potentials match their closed forms") {
    for (int i = 0; i <= 400; ++i) {
        const double qp = 150.0 * i / 400.0;
        CHECK(synthetic_potential(SyntheticElectrode::lco_like, qp) ==
              doctest::Approx(pe_reference(qp)).epsilon(1e-14));
        const double qn = 350.0 * i / 400.0;
        CHECK(synthetic_potential(SyntheticElectrode::graphite_like, qn) ==
              doctest::Approx(ne_reference(qn)).epsilon(1e-14));
    }
    CHECK(synthetic_q_max(SyntheticElectrode::lco_like) == kLcoLikeForm.q_max);
    CHECK(synthetic_q_max(SyntheticElectrode::graphite_like) == kGraphiteLikeForm.q_max);
}

TEST_CASE("both synthetic potentials strictly decrease over their range") {
    double prev = synthetic_potential(SyntheticElectrode::lco_like, 0.0);
    for (int i = 1; i <= 3000; ++i) {
        const double v = synthetic_potential(SyntheticElectrode::lco_like,
                                             kLcoLikeForm.q_max * i / 3000.0);
        CHECK(v < prev);
        prev = v;
    }
    prev = synthetic_potential(SyntheticElectrode::graphite_like, 0.0);
    for (int i = 1; i <= 3000; ++i) {
        const double v = synthetic_potential(SyntheticElectrode::graphite_like,
                                             kGraphiteLikeForm.q_max * i / 3000.0);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("sampled synthetic electrodes hit the closed form at the nodes") {
    const ElectrodeCurve pe = synthetic_electrode(SyntheticElectrode::lco_like, 256);
    REQUIRE(pe.q.size() == 256);
    CHECK(pe.q.front() == 0.0);
    CHECK(pe.q.back() == doctest::Approx(kLcoLikeForm.q_max).epsilon(1e-14));
    CHECK(pe.electrode == Electrode::positive);
    for (std::size_t i = 0; i < pe.q.size(); ++i) {
        CHECK(pe.v[i] == doctest::Approx(pe_reference(pe.q[i])).epsilon(1e-14));
        CHECK(pe.eval(pe.q[i]) == doctest::Approx(pe.v[i]).epsilon(1e-13));
    }

    const ElectrodeCurve ne = synthetic_electrode(SyntheticElectrode::graphite_like, 256);
    CHECK(ne.q.back() == doctest::Approx(kGraphiteLikeForm.q_max).epsilon(1e-14));
    CHECK(ne.electrode == Electrode::negative);
    for (std::size_t i = 0; i < ne.q.size(); ++i)
        CHECK(ne.v[i] == doctest::Approx(ne_reference(ne.q[i])).epsilon(1e-14));
}

TEST_CASE("dense sampling interpolates the closed form tightly off-node") {
    const ElectrodeCurve pe = synthetic_electrode(SyntheticElectrode::lco_like, 768);
    const ElectrodeCurve ne = synthetic_electrode(SyntheticElectrode::graphite_like, 768);
    double max_pe = 0.0, max_ne = 0.0;
    for (int i = 0; i <= 5000; ++i) {
        const double qp = kLcoLikeForm.q_max * i / 5000.0;
        max_pe = std::max(max_pe, std::abs(pe.eval(qp) - pe_reference(qp)));
        const double qn = kGraphiteLikeForm.q_max * i / 5000.0;
        max_ne = std::max(max_ne, std::abs(ne.eval(qn) - ne_reference(qn)));
    }
    CHECK(max_pe < 1e-5);
    // The negative curve has a steep low-filling shoulder that dominates the
    // interpolation error, so its budget is an order of magnitude looser.
    CHECK(max_ne < 1e-4);
}

TEST_CASE("synthetic_electrode rejects sparse grids") {
    CHECK_THROWS_AS(synthetic_electrode(SyntheticElectrode::lco_like, 63), InvalidArgument);
    CHECK_NOTHROW(synthetic_electrode(SyntheticElectrode::lco_like, 64));
}

TEST_CASE("electrode CSV round trip is bit exact") {
    TempDir tmp;
    const ElectrodeCurve pe = synthetic_electrode(SyntheticElectrode::lco_like, 128);
    const std::string path = tmp.file("pe.csv");
    save_electrode_csv(pe, path);
    const ElectrodeCurve back = load_electrode_csv(path, Electrode::positive);
    REQUIRE(back.q.size() == pe.q.size());
    for (std::size_t i = 0; i < pe.q.size(); ++i) {
        CHECK(back.q[i] == pe.q[i]);
        CHECK(back.v[i] == pe.v[i]);
    }
    CHECK(back.electrode == Electrode::positive);
}

TEST_CASE("electrode CSV loader sorts rows by q") {
    TempDir tmp;
    const std::string path = tmp.file("shuffled.csv");
    {
        std::ofstream out(path);
        out << "q_mAh_per_g,v_volts\n";
        // 16 rows written in reverse q order.
        for (int i = 15; i >= 0; --i) out << 10 * i << "," << 4.0 - 0.01 * i << "\n";
    }
    const ElectrodeCurve c = load_electrode_csv(path, Electrode::negative);
    REQUIRE(c.q.size() == 16);
    for (std::size_t i = 1; i < c.q.size(); ++i) CHECK(c.q[i] > c.q[i - 1]);
    CHECK(c.q.front() == 0.0);
    CHECK(c.v.front() == 4.0);
}

TEST_CASE("electrode CSV loader rejects malformed files") {
    TempDir tmp;

    SUBCASE("wrong header") {
        const std::string path = tmp.file("hdr.csv");
        std::ofstream(path) << "capacity,volts\n0,4\n";
        CHECK_THROWS_AS(load_electrode_csv(path, Electrode::positive), ParseError);
    }
    SUBCASE("duplicate q") {
        const std::string path = tmp.file("dup.csv");
        std::ofstream out(path);
        out << "q_mAh_per_g,v_volts\n";
        for (int i = 0; i < 16; ++i) out << 10 * i << "," << 4.0 - 0.01 * i << "\n";
        out << "50,3.9\n";  // repeats q = 50
        out.close();
        CHECK_THROWS_AS(load_electrode_csv(path, Electrode::positive), ValidationError);
    }
    SUBCASE("too few rows") {
        const std::string path = tmp.file("few.csv");
        std::ofstream out(path);
        out << "q_mAh_per_g,v_volts\n";
        for (int i = 0; i < 10; ++i) out << 10 * i << "," << 4.0 - 0.01 * i << "\n";
        out.close();
        CHECK_THROWS_AS(load_electrode_csv(path, Electrode::positive), ParseError);
    }
}

TEST_CASE("default pair carries the nominal specific capacities") {
    const ElectrodePair pair = default_pair();
    CHECK(pair.q_spec_pe == 140.0);
    CHECK(pair.q_spec_ne == 350.0);
    CHECK(pair.pe.electrode == Electrode::positive);
    CHECK(pair.ne.electrode == Electrode::negative);
    CHECK(pair.pe.q.back() == doctest::Approx(150.0));
    CHECK(pair.ne.q.back() == doctest::Approx(350.0));
}
