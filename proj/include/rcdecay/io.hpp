// io.hpp — model files (strict JSON), time-series CSV and atomic file output.
//
// Model file:
//   {
//     "label": "fig2-strong",            optional
//     "detuning": 0.0,                   optional, default 0
//     "bands": [
//       { "delta": 0.2048,
//         "n_half": 400,                 optional, see resolve_truncation
//         "profile": { "kind": "constant", "beta": 0.2496 } },
//       { "delta": 0.314159, "profile": { "kind": "harmonic", "beta": 2.1859, "T": 1.0 } },
//       { "delta": 1.0, "profile": { "kind": "explicit", "values": [0.1, 0.2, 0.1] } }
//     ]
//   }
// Unknown keys anywhere are rejected.

#pragma once

#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "rcdecay/errors.hpp"
#include "rcdecay/model.hpp"
#include "rcdecay/time_series.hpp"

namespace rcdecay::io {

using json = nlohmann::json;

// ---------------------------------- numbers ----------------------------------

// Shortest-round-trip is not enough for byte-stable diffs across builds, so
// every value is printed with 17 significant digits.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return {buf, res.ptr};
}

inline double parse_double(std::string_view s) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    double v = 0.0;
    const auto* first = s.data();
    if (!s.empty() && s.front() == '+') ++first;
    auto res = std::from_chars(first, s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw InvalidArgument("not a number: '" + std::string(s) + "'");
    }
    return v;
}

// -------------------------------- atomic write --------------------------------

// Write to a sibling temporary and rename over the target, so readers never
// see a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError("output directory does not exist: " + dir.string());
    }
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw ConfigError("write failed for " + path.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw ConfigError("cannot move output into place at " + path.string());
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --------------------------------- model JSON ---------------------------------

namespace detail {

inline void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!obj.is_object()) throw InvalidSpec(where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw InvalidSpec(where + ": unknown key '" + key + "'");
    }
}

inline double number(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw InvalidSpec(where + ": missing '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_number()) throw InvalidSpec(where + ": '" + key + "' must be a number");
    return v.get<double>();
}

} // namespace detail

// Bands without "n_half" get n_half = 0 here; resolve_truncation fills them in.
inline ModelSpec parse_model(const json& doc) {
    detail::check_keys(doc, {"label", "detuning", "bands"}, "model");
    ModelSpec m;
    if (doc.contains("label")) {
        if (!doc["label"].is_string()) throw InvalidSpec("model: 'label' must be a string");
        m.label = doc["label"].get<std::string>();
    }
    if (doc.contains("detuning")) m.detuning = detail::number(doc, "detuning", "model");
    if (!doc.contains("bands") || !doc["bands"].is_array() || doc["bands"].empty()) {
        throw InvalidSpec("model: 'bands' must be a non-empty array");
    }
    for (std::size_t i = 0; i < doc["bands"].size(); ++i) {
        const auto& b = doc["bands"][i];
        const std::string where = "bands[" + std::to_string(i) + "]";
        detail::check_keys(b, {"delta", "n_half", "profile"}, where);
        BandSpec band;
        band.delta = detail::number(b, "delta", where);
        band.n_half = 0;
        if (b.contains("n_half")) {
            if (!b["n_half"].is_number_integer()) throw InvalidSpec(where + ": 'n_half' must be an integer");
            band.n_half = b["n_half"].get<int>();
            if (band.n_half < 1) throw InvalidSpec(where + ": 'n_half' must be >= 1");
        }
        if (!b.contains("profile")) throw InvalidSpec(where + ": missing 'profile'");
        const auto& p = b["profile"];
        const std::string pw = where + ".profile";
        if (!p.is_object() || !p.contains("kind") || !p["kind"].is_string()) {
            throw InvalidSpec(pw + ": needs a string 'kind'");
        }
        const auto kind = p["kind"].get<std::string>();
        if (kind == "constant") {
            detail::check_keys(p, {"kind", "beta"}, pw);
            band.profile = ConstantCoupling{detail::number(p, "beta", pw)};
        } else if (kind == "harmonic") {
            detail::check_keys(p, {"kind", "beta", "T"}, pw);
            band.profile = HarmonicCoupling{detail::number(p, "beta", pw), detail::number(p, "T", pw)};
        } else if (kind == "explicit") {
            detail::check_keys(p, {"kind", "values"}, pw);
            if (!p.contains("values") || !p["values"].is_array()) throw InvalidSpec(pw + ": 'values' must be an array");
            ExplicitCoupling e;
            for (const auto& v : p["values"]) {
                if (!v.is_number()) throw InvalidSpec(pw + ": 'values' must hold numbers");
                e.values.push_back(v.get<double>());
            }
            if (e.values.size() % 2 == 0) throw InvalidSpec(pw + ": 'values' needs an odd count 2*n_half+1");
            const int implied = static_cast<int>(e.values.size() / 2);
            if (band.n_half == 0) band.n_half = implied;
            band.profile = std::move(e);
        } else {
            throw InvalidSpec(pw + ": unknown kind '" + kind + "' (constant, harmonic, explicit)");
        }
        m.bands.push_back(std::move(band));
    }
    return m;
}

struct TruncationReport {
    std::vector<bool> defaulted;  // per band: n_half came from the default rule
    double gamma_total{0.0};      // rate the default rule used
};

// Fill missing n_half with default_n_half(Δ, γ_total); an explicit override
// (> 0) replaces every band's n_half whose profile is not explicit.
inline TruncationReport resolve_truncation(ModelSpec& m, int override_n_half = 0) {
    TruncationReport r;
    std::vector<bool> missing;
    for (auto& b : m.bands) {
        missing.push_back(b.n_half == 0);
        if (b.n_half == 0) b.n_half = 1;  // effective_rate only needs a valid band
        r.gamma_total += effective_rate(b);
    }
    for (std::size_t i = 0; i < m.bands.size(); ++i) {
        auto& b = m.bands[i];
        const bool is_explicit = std::holds_alternative<ExplicitCoupling>(b.profile);
        bool defaulted = false;
        if (override_n_half > 0 && !is_explicit) {
            b.n_half = override_n_half;
        } else if (missing[i]) {
            b.n_half = default_n_half(b.delta, r.gamma_total);
            defaulted = true;
        }
        r.defaulted.push_back(defaulted);
    }
    m.validate();
    return r;
}

inline json model_to_json(const ModelSpec& m) {
    json doc;
    doc["label"] = m.label;
    doc["detuning"] = m.detuning;
    doc["bands"] = json::array();
    for (const auto& b : m.bands) {
        json jb;
        jb["delta"] = b.delta;
        jb["n_half"] = b.n_half;
        if (const auto* c = std::get_if<ConstantCoupling>(&b.profile)) {
            jb["profile"] = {{"kind", "constant"}, {"beta", c->beta}};
        } else if (const auto* h = std::get_if<HarmonicCoupling>(&b.profile)) {
            jb["profile"] = {{"kind", "harmonic"}, {"beta", h->beta}, {"T", h->period}};
        } else {
            jb["profile"] = {{"kind", "explicit"}, {"values", std::get<ExplicitCoupling>(b.profile).values}};
        }
        doc["bands"].push_back(std::move(jb));
    }
    return doc;
}

inline ModelSpec load_model(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw InvalidSpec(path.string() + ": " + e.what());
    }
    return parse_model(doc);
}

// ------------------------------------ CSV ------------------------------------

// Columns: t, re_a, im_a, abs_a, abs_a2, P_1..P_k, norm. When the series
// carries no populations but `band_count` > 0, the P and norm columns are
// written as nan so the layout stays fixed.
inline std::string to_csv(const TimeSeries& ts, std::size_t band_count) {
    ts.validate();
    const bool pops = ts.has_populations();
    if (pops && ts.populations.size() != band_count) {
        throw InvalidArgument("to_csv: population columns do not match the band count");
    }
    std::string out = "t,re_a,im_a,abs_a,abs_a2";
    for (std::size_t b = 0; b < band_count; ++b) out += ",P_" + std::to_string(b + 1);
    out += ",norm\n";
    out.reserve(out.size() + ts.size() * (6 + band_count) * 24);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto a = ts.amplitude[i];
        out += format_double(ts.times[i]);
        for (double v : {a.real(), a.imag(), std::abs(a), std::norm(a)}) {
            out += ',';
            out += format_double(v);
        }
        for (std::size_t b = 0; b < band_count; ++b) {
            out += ',';
            out += format_double(pops ? ts.populations[b][i] : std::nan(""));
        }
        out += ',';
        out += format_double(pops ? ts.norm(i) : std::nan(""));
        out += '\n';
    }
    return out;
}

inline void write_csv(const std::filesystem::path& path, const TimeSeries& ts, std::size_t band_count) {
    write_atomic(path, to_csv(ts, band_count));
}

// Inverse of to_csv. Populations are attached only when every value is finite.
inline TimeSeries parse_csv(const std::string& text, const std::string& source = "csv") {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument("csv: empty input");
    std::vector<std::string> header;
    {
        std::stringstream hs(line);
        std::string col;
        while (std::getline(hs, col, ',')) header.push_back(col);
    }
    if (header.size() < 6 || header[0] != "t" || header[1] != "re_a" || header[2] != "im_a" || header.back() != "norm") {
        throw InvalidArgument("csv: unexpected header '" + line + "'");
    }
    const std::size_t bands = header.size() - 6;
    TimeSeries ts;
    ts.source = source;
    std::vector<std::vector<double>> pops(bands);
    bool finite_pops = bands > 0;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<double> v;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const auto next = line.find(',', pos);
            const auto end = next == std::string::npos ? line.size() : next;
            v.push_back(parse_double(std::string_view(line).substr(pos, end - pos)));
            pos = end + 1;
        }
        if (v.size() != header.size()) throw InvalidArgument("csv: wrong column count on line " + std::to_string(row));
        ts.times.push_back(v[0]);
        ts.amplitude.emplace_back(v[1], v[2]);
        for (std::size_t b = 0; b < bands; ++b) {
            pops[b].push_back(v[5 + b]);
            finite_pops = finite_pops && std::isfinite(v[5 + b]);
        }
    }
    if (finite_pops) ts.populations = std::move(pops);
    ts.validate();
    ts.update_norm_drift();
    return ts;
}

inline TimeSeries load_csv(const std::filesystem::path& path) { return parse_csv(read_file(path), path.string()); }

} // namespace rcdecay::io
