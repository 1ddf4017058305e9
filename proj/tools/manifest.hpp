// Copyright 2026 The posloss Authors.
// SPDX-License-Identifier: Apache-2.0

// Run manifests: command line, seed, tool version and SHA-256 of every input and
// output, so a run can be repeated and its outputs compared byte for byte.

#pragma once

#include <posloss/core.hpp>

#include "json.hpp"

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

namespace posloss::cli
{
inline std::string sha256_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot hash " + path);
    const std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw IoError("sha256 failed for " + path);

    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i)
    {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

class Manifest
{
public:
    Manifest(std::vector<std::string> argv, std::uint64_t seed) : argv_(std::move(argv)), seed_(seed) {}

    void input(const std::string& path) { inputs_.push_back(path); }
    void output(const std::string& path) { outputs_.push_back(path); }

    nlohmann::json to_json() const
    {
        nlohmann::json j;
        j["tool"] = "posloss";
        j["version"] = version;
        j["command"] = argv_;
        j["cwd"] = std::filesystem::current_path().string();
        j["seed"] = seed_;
        j["inputs"] = nlohmann::json::array();
        for (const auto& p : inputs_)
            j["inputs"].push_back({{"path", p}, {"sha256", sha256_file(p)}});
        j["outputs"] = nlohmann::json::array();
        for (const auto& p : outputs_)
            j["outputs"].push_back({{"path", p}, {"sha256", sha256_file(p)}});
        return j;
    }

    void write(const std::string& path) const
    {
        std::ofstream out(path, std::ios::trunc);
        if (!out)
            throw IoError("cannot write manifest " + path);
        out << to_json().dump(2) << '\n';
    }

private:
    std::vector<std::string> argv_;
    std::uint64_t seed_;
    std::vector<std::string> inputs_;
    std::vector<std::string> outputs_;
};

}  // namespace posloss::cli
