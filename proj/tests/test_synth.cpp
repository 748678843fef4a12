#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "medpruner/dins.hpp"
#include "medpruner/saliency.hpp"
#include "medpruner/synth.hpp"

using namespace medpruner;

TEST_CASE("step volume values follow the block staircase", "[synth]") {
    Volume vol = make_step_volume(4, 2, 2, 2, 0.5);
    CHECK(vol.at(0, 0, 0) == 0.0f);
    CHECK(vol.at(1, 1, 1) == 0.0f);
    CHECK(vol.at(2, 0, 0) == 0.5f);
    CHECK(vol.at(3, 1, 0) == 0.5f);
}

TEST_CASE("step volume with zero delta is all zeros", "[synth]") {
    Volume vol = make_step_volume(6, 3, 3, 2, 0.0);
    for (float v : vol.data) CHECK(v == 0.0f);
}

TEST_CASE("step volume clamps to the unit range", "[synth]") {
    Volume vol = make_step_volume(10, 2, 2, 1, 0.3);
    CHECK(vol.at(9, 0, 0) == 1.0f);  // 9 * 0.3 clamped
    CHECK(vol.at(3, 0, 0) == Catch::Approx(0.9).margin(1e-6));
}

TEST_CASE("consecutive step blocks differ by exactly delta", "[synth]") {
    Volume vol = make_step_volume(9, 4, 4, 3, 0.25);
    for (std::uint32_t i = 0; i + 1 < vol.depth; ++i) {
        double sum = 0.0;
        for (std::size_t p = 0; p < vol.slice_pixels(); ++p)
            sum += std::fabs(static_cast<double>(vol.slice(i + 1)[p]) - vol.slice(i)[p]);
        const double delta = sum / static_cast<double>(vol.slice_pixels());
        if ((i + 1) % 3 == 0)
            CHECK(delta == Catch::Approx(0.25).margin(1e-6));
        else
            CHECK(delta == 0.0);
    }
}

TEST_CASE("step volume validates parameters", "[synth]") {
    REQUIRE_THROWS_AS(make_step_volume(4, 2, 2, 0, 0.5), ValidationError);
    REQUIRE_THROWS_AS(make_step_volume(4, 2, 2, 2, -0.5), ValidationError);
    REQUIRE_THROWS_AS(make_step_volume(0, 2, 2, 2, 0.5), ValidationError);
}

TEST_CASE("lesion volume is background away from the bump", "[synth]") {
    Volume vol = make_lesion_volume(20, 8, 8, 10, 3.0, 0.8);
    for (std::size_t p = 0; p < vol.slice_pixels(); ++p)
        CHECK(vol.slice(0)[p] == Catch::Approx(0.1).margin(1e-6));
}

TEST_CASE("lesion center voxel reaches background plus amplitude", "[synth]") {
    Volume vol = make_lesion_volume(21, 8, 8, 10, 4.0, 0.8);
    CHECK(vol.at(10, 4, 4) == Catch::Approx(0.9).margin(1e-6));
}

TEST_CASE("lesion volume is symmetric about the center slice", "[synth]") {
    Volume vol = make_lesion_volume(21, 6, 6, 10, 5.0, 0.5);
    for (std::uint32_t d = 1; d <= 4; ++d) {
        const float* lo = vol.slice(10 - d);
        const float* hi = vol.slice(10 + d);
        for (std::size_t p = 0; p < vol.slice_pixels(); ++p) REQUIRE(lo[p] == hi[p]);
    }
}

TEST_CASE("lesion volume validates parameters", "[synth]") {
    REQUIRE_THROWS_AS(make_lesion_volume(4, 2, 2, 9, 2.0, 0.5), ValidationError);
    REQUIRE_THROWS_AS(make_lesion_volume(4, 2, 2, 1, 0.0, 0.5), ValidationError);
    REQUIRE_THROWS_AS(make_lesion_volume(4, 2, 2, 1, 2.0, -1.0), ValidationError);
}

TEST_CASE("skewed head stack concentrates importance on the dominant token", "[synth]") {
    HeadStack s = make_skewed_headstack(16, 4, 9, 12.0);
    std::vector<double> vhat = aggregate_importance(s);
    std::size_t argmax = 0;
    for (std::size_t j = 1; j < vhat.size(); ++j)
        if (vhat[j] > vhat[argmax]) argmax = j;
    CHECK(argmax == 9);
}

TEST_CASE("zero gap degenerates to uniform importance", "[synth]") {
    HeadStack s = make_skewed_headstack(8, 4, 3, 0.0);
    std::vector<double> vhat = aggregate_importance(s);
    for (double x : vhat) CHECK(x == Catch::Approx(1.0 / 8.0).margin(1e-9));
}

TEST_CASE("gap twenty leaves a single-token nucleus at tau 0.9", "[synth]") {
    HeadStack s = make_skewed_headstack(256, 16, 31, 20.0);
    std::vector<double> vhat = aggregate_importance(s);
    ImportanceVector v;
    v.weights = vhat;  // vhat is already a distribution over tokens
    PrimarySet p = nucleus_select(v, 0.9);
    CHECK(p.indices == std::vector<std::uint32_t>{31});
    // softmax mass of one +20 logit against 255 zeros
    const double expected = std::exp(20.0) / (std::exp(20.0) + 255.0);
    CHECK(p.cumulative_mass == Catch::Approx(expected).margin(1e-9));
}

TEST_CASE("skewed head stack validates parameters", "[synth]") {
    REQUIRE_THROWS_AS(make_skewed_headstack(4, 2, 4, 1.0), ValidationError);
    REQUIRE_THROWS_AS(make_skewed_headstack(0, 2, 0, 1.0), ValidationError);
}
