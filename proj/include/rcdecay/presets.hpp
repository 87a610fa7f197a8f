// presets.hpp — the parameter sets of the reference figures.

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rcdecay/errors.hpp"
#include "rcdecay/model.hpp"
#include "rcdecay/numeric.hpp"

namespace rcdecay {

struct Preset {
    ModelSpec model;
    double t_max{0.0};    // default run length
    double sample_dt{0.0};
    double time_unit{0.0};  // τ of the slowest band, or T for harmonic presets
    std::string note;
};

inline constexpr std::array<std::string_view, 6> preset_names{"fig2-weak", "fig2-strong", "fig3",
                                                              "fig4",      "fig5",        "fig5-body"};

namespace detail {

inline BandSpec constant_band(double beta, double delta, int n_half = 0) {
    BandSpec b{delta, ConstantCoupling{beta}, 1};
    b.n_half = n_half > 0 ? n_half : default_n_half(delta, numeric::two_pi * beta * beta / delta);
    return b;
}

inline Preset qubit_with_heat(int order, const char* name) {
    const double period = 4.0;
    const double delta = numeric::two_pi / (order * period);
    Preset p;
    p.model.label = name;
    // 1000 phonon states and 5000 reservoir states
    p.model.bands.push_back(BandSpec{delta, HarmonicCoupling{0.4372, period}, 500});
    p.model.bands.push_back(BandSpec{delta / 5.0, ConstantCoupling{0.176}, 2500});
    p.time_unit = period;
    p.t_max = 10.0 * period;
    p.sample_dt = period / 400.0;
    return p;
}

} // namespace detail

inline Preset make_preset(std::string_view name) {
    Preset p;
    if (name == "fig2-weak" || name == "fig2-strong") {
        const bool weak = name == "fig2-weak";
        const double beta = weak ? 0.07 : 0.2496;
        const double delta = weak ? 0.035 : 0.2048;
        p.model.label = std::string(name);
        p.model.bands.push_back(detail::constant_band(beta, delta));
        p.time_unit = numeric::two_pi / delta;
        p.t_max = 3.2 * p.time_unit;
        p.sample_dt = p.time_unit / 2000.0;
    } else if (name == "fig3") {
        p.model.label = "fig3";
        const double beta = 0.2496;
        const double g12 = numeric::two_pi * beta * beta * (1.0 / 0.1024 + 1.0 / 0.0613);
        p.model.bands.push_back(BandSpec{0.1024, ConstantCoupling{beta}, default_n_half(0.1024, g12)});
        p.model.bands.push_back(BandSpec{0.0613, ConstantCoupling{beta}, default_n_half(0.0613, g12)});
        p.time_unit = numeric::two_pi / 0.0613;
        p.t_max = 2.0 * p.time_unit;
        p.sample_dt = 0.02;
    } else if (name == "fig4") {
        const int order = 20;
        const double period = 1.0;
        p.model.label = "fig4";
        // 7000 states including the embedded one
        p.model.bands.push_back(
            BandSpec{numeric::two_pi / (order * period), HarmonicCoupling{2.1859, period}, 3499});
        p.time_unit = period;
        p.t_max = 22.0 * period;
        p.sample_dt = period / 1000.0;
    } else if (name == "fig5") {
        p = detail::qubit_with_heat(20, "fig5");
        p.note = "caption parameters (M=20)";
    } else if (name == "fig5-body") {
        p = detail::qubit_with_heat(4, "fig5-body");
        p.note = "body-text variant (M=4)";
    } else {
        std::string known;
        for (auto n : preset_names) known += (known.empty() ? "" : ", ") + std::string(n);
        throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
    }
    p.model.validate();
    return p;
}

} // namespace rcdecay
