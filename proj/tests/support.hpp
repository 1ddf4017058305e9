// Shared fixtures for the posloss tests.

#pragma once

#include <posloss/posloss.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

namespace posloss::test
{
/// Free-space loss straight from 20 log10(4 pi d f / c); independent of channel.hpp.
inline double fspl_oracle(double d_m, double f_mhz)
{
    return 20.0 * std::log10(4.0 * std::numbers::pi * d_m * f_mhz * 1e6 / 299792458.0);
}

class TempDir
{
public:
    TempDir()
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("posloss-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline PositionPair pair_of(double tx_x, double tx_y, double rx_x, double rx_y, double z = 1.5)
{
    return {{tx_x, tx_y, z}, {rx_x, rx_y, z}};
}

inline std::vector<double> std_normal_draws(std::size_t n, double sd, unsigned seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist(0.0, sd);
    std::vector<double> out(n);
    for (auto& v : out)
        v = dist(gen);
    return out;
}

}  // namespace posloss::test
