#pragma once

#include <sweepscope/sweepscope.hpp>

#include <filesystem>
#include <random>
#include <string>

namespace testing_support {

using namespace sweepscope;

/// Iteration from a label vector; representatives are per-group means of `x`.
inline IterationResult make_iteration(const std::string& key, const Labels& labels, const Matrix& x)
{
    int k = 0;
    for (int l : labels)
        k = std::max(k, l + 1);
    auto groups = groups_from_labels(labels, k);
    for (auto& g : groups) {
        g.representative = Vector::Zero(x.cols());
        for (auto i : g.members)
            g.representative += x.row(static_cast<Eigen::Index>(i)).transpose();
        g.representative /= static_cast<double>(g.members.size());
        g.metrics["size"] = static_cast<double>(g.members.size());
    }
    std::vector<double> m(labels.size(), 0.5), o(labels.size(), 0.25);
    return assemble_iteration(key, 0.0, labels, m, o, groups, {});
}

inline Matrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, scale);
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x.data()[i] = nd(rng);
    return x;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("sweepscope-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& sub = {}) const { return sub.empty() ? path_.string() : (path_ / sub).string(); }

private:
    std::filesystem::path path_;
};

inline Json blobs_config(int k_lo = 2, int k_hi = 8)
{
    auto j = Json::parse(R"({
        "method": "kmeans",
        "fixed": {"seed": 0},
        "input": {"synthetic": {"kind": "blobs", "n_items": 300, "centers": 3, "separation": 20, "spread": 1, "seed": 7}},
        "projection": {"method": "mds", "seed": 0},
        "count_noise_archetypes": false
    })");
    j["sweep"] = {{"param", "k"}, {"start", k_lo}, {"stop", k_hi}, {"step", 1}};
    return j;
}

inline RunOutput run_config(const Json& j, std::optional<std::size_t> workers = 1)
{
    const auto c = parse_config(j);
    return run_sweep(c, load_input(c.input), SweepOptions{workers});
}

}  // namespace testing_support
