// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <posloss/gbrt.hpp>
#include <posloss/svr.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace posloss
{
/// Trained deterministic path-loss regressor.
using PathLossModel = std::variant<GbrtModel, SvrModel>;

inline double predict(const PathLossModel& model, const FeatureVector& v) noexcept
{
    return std::visit([&](const auto& m) { return m.predict(v); }, model);
}

inline const char* kind_name(const PathLossModel& model) noexcept
{
    return std::holds_alternative<GbrtModel>(model) ? "gbrt" : "svr";
}

/// Mean squared error in dB^2 over (features, target) rows.
inline double evaluate_mse(const PathLossModel& model, std::span<const TrainingRow> test)
{
    if (test.empty())
        throw ValidationError("evaluate_mse: empty test set");
    double s = 0.0;
    for (const auto& [x, y] : test)
    {
        const double e = predict(model, x) - y;
        s += e * e;
    }
    return s / static_cast<double>(test.size());
}

// Model file layout (all integers and doubles little-endian), see docs/model-format.md:
//   magic "PLOSSMDL" | u32 version | u32 kind (1 = GBRT, 2 = SVR) | payload
inline constexpr char model_magic[8] = {'P', 'L', 'O', 'S', 'S', 'M', 'D', 'L'};
inline constexpr std::uint32_t model_format_version = 1;

enum class ModelKind : std::uint32_t
{
    gbrt = 1,
    svr = 2,
};

namespace detail
{
class ByteWriter
{
public:
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i)
            bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i)
            bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    const std::vector<char>& bytes() const noexcept { return bytes_; }

private:
    std::vector<char> bytes_;
};

class ByteReader
{
public:
    explicit ByteReader(std::span<const char> bytes) : bytes_(bytes) {}

    std::uint64_t uint(int width)
    {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i)
            v |= std::uint64_t{static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])} << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
    std::uint64_t u64() { return uint(8); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    void raw(char* out, std::size_t n)
    {
        need(n);
        std::memcpy(out, bytes_.data() + pos_, n);
        pos_ += n;
    }
    /// Guards allocations driven by counts read from the file.
    void expect_at_least(std::uint64_t count, std::size_t bytes_each) const
    {
        if (count > (bytes_.size() - pos_) / bytes_each)
            throw ValidationError("model file truncated");
    }
    bool at_end() const noexcept { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n)
            throw ValidationError("model file truncated");
    }
    std::span<const char> bytes_;
    std::size_t pos_ = 0;
};

inline void write_vector(ByteWriter& w, const FeatureVector& v)
{
    for (double d : v)
        w.f64(d);
}

inline FeatureVector read_vector(ByteReader& r)
{
    FeatureVector v;
    for (double& d : v)
        d = r.f64();
    return v;
}

}  // namespace detail

inline std::vector<char> serialize_model(const PathLossModel& model)
{
    detail::ByteWriter w;
    w.raw(model_magic, sizeof(model_magic));
    w.u32(model_format_version);
    if (const auto* g = std::get_if<GbrtModel>(&model))
    {
        w.u32(static_cast<std::uint32_t>(ModelKind::gbrt));
        w.f64(g->base_prediction);
        w.f64(g->learning_rate);
        w.u64(g->trees.size());
        for (const auto& t : g->trees)
        {
            w.u64(t.nodes.size());
            for (const auto& n : t.nodes)
            {
                w.i32(n.feature);
                w.f64(n.threshold);
                w.u32(n.left);
                w.u32(n.right);
                w.f64(n.value);
            }
        }
    }
    else
    {
        const auto& s = std::get<SvrModel>(model);
        w.u32(static_cast<std::uint32_t>(ModelKind::svr));
        w.f64(s.bias);
        w.f64(s.kernel_gamma);
        w.f64(s.c);
        w.f64(s.epsilon);
        w.u32(s.converged ? 1u : 0u);
        w.u64(s.iterations);
        detail::write_vector(w, s.feature_means);
        detail::write_vector(w, s.feature_scales);
        w.u64(s.support_vectors.size());
        for (std::size_t i = 0; i < s.support_vectors.size(); ++i)
        {
            detail::write_vector(w, s.support_vectors[i]);
            w.f64(s.dual_coefficients[i]);
            w.f64(s.multiplicity[i]);
        }
    }
    return w.bytes();
}

inline PathLossModel deserialize_model(std::span<const char> bytes)
{
    detail::ByteReader r(bytes);
    char magic[8];
    r.raw(magic, sizeof(magic));
    if (std::memcmp(magic, model_magic, sizeof(magic)) != 0)
        throw ValidationError("not a path-loss model file (bad magic)");
    const auto version = r.u32();
    if (version != model_format_version)
        throw ValidationError("unsupported model format version " + std::to_string(version));
    const auto kind = r.u32();

    PathLossModel out;
    if (kind == static_cast<std::uint32_t>(ModelKind::gbrt))
    {
        GbrtModel g;
        g.base_prediction = r.f64();
        g.learning_rate = r.f64();
        const auto n_trees = r.u64();
        r.expect_at_least(n_trees, 8);
        g.trees.resize(n_trees);
        for (auto& t : g.trees)
        {
            const auto n_nodes = r.u64();
            r.expect_at_least(n_nodes, 28);
            if (n_nodes == 0)
                throw ValidationError("model file: empty tree");
            t.nodes.resize(n_nodes);
            for (auto& n : t.nodes)
            {
                n.feature = r.i32();
                n.threshold = r.f64();
                n.left = r.u32();
                n.right = r.u32();
                n.value = r.f64();
            }
            for (std::size_t i = 0; i < t.nodes.size(); ++i)
            {
                const auto& n = t.nodes[i];
                if (n.feature >= 6 || n.feature < -1)
                    throw ValidationError("model file: node feature index out of range");
                if (!std::isfinite(n.value))
                    throw ValidationError("model file: non-finite leaf value");
                // children always follow their parent, which also rules out cycles
                if (n.feature >= 0 && (n.left <= i || n.right <= i || n.left >= n_nodes || n.right >= n_nodes))
                    throw ValidationError("model file: invalid child index");
            }
        }
        out = std::move(g);
    }
    else if (kind == static_cast<std::uint32_t>(ModelKind::svr))
    {
        SvrModel s;
        s.bias = r.f64();
        s.kernel_gamma = r.f64();
        s.c = r.f64();
        s.epsilon = r.f64();
        s.converged = r.u32() != 0;
        s.iterations = r.u64();
        s.feature_means = detail::read_vector(r);
        s.feature_scales = detail::read_vector(r);
        const auto n_sv = r.u64();
        r.expect_at_least(n_sv, 64);
        for (std::uint64_t i = 0; i < n_sv; ++i)
        {
            s.support_vectors.push_back(detail::read_vector(r));
            s.dual_coefficients.push_back(r.f64());
            s.multiplicity.push_back(r.f64());
        }
        out = std::move(s);
    }
    else
        throw ValidationError("model file: unknown model kind tag " + std::to_string(kind));

    if (!r.at_end())
        throw ValidationError("model file: trailing bytes");
    return out;
}

inline void save_model(const PathLossModel& model, const std::string& path)
{
    const auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write model file " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("write failed for " + path);
}

inline PathLossModel load_model(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open model file " + path);
    const std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return deserialize_model(bytes);
}

/// Loads a model file and requires a specific kind.
template <typename Model>
Model load_model_as(const std::string& path)
{
    auto m = load_model(path);
    if (auto* p = std::get_if<Model>(&m))
        return std::move(*p);
    throw ValidationError("model file " + path + " holds a " + kind_name(m) + " model");
}

}  // namespace posloss
