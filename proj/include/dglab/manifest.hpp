#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "dglab/errors.hpp"
#include "dglab/io.hpp"

namespace dglab {

// ============================================================================
// Run manifests. Every CLI run records what it was asked to do and a digest
// of every file it wrote, so a rerun can prove it reproduced the outputs
// byte for byte. Nothing here depends on clocks; two identical runs produce
// identical manifests.
// ============================================================================

namespace detail {

inline constexpr std::array<std::uint32_t, 64> k_sha256_round = {
    0x428a2f98u, 0x71374491u, 0xb5c0fbcfu, 0xe9b5dba5u, 0x3956c25bu, 0x59f111f1u, 0x923f82a4u,
    0xab1c5ed5u, 0xd807aa98u, 0x12835b01u, 0x243185beu, 0x550c7dc3u, 0x72be5d74u, 0x80deb1feu,
    0x9bdc06a7u, 0xc19bf174u, 0xe49b69c1u, 0xefbe4786u, 0x0fc19dc6u, 0x240ca1ccu, 0x2de92c6fu,
    0x4a7484aau, 0x5cb0a9dcu, 0x76f988dau, 0x983e5152u, 0xa831c66du, 0xb00327c8u, 0xbf597fc7u,
    0xc6e00bf3u, 0xd5a79147u, 0x06ca6351u, 0x14292967u, 0x27b70a85u, 0x2e1b2138u, 0x4d2c6dfcu,
    0x53380d13u, 0x650a7354u, 0x766a0abbu, 0x81c2c92eu, 0x92722c85u, 0xa2bfe8a1u, 0xa81a664bu,
    0xc24b8b70u, 0xc76c51a3u, 0xd192e819u, 0xd6990624u, 0xf40e3585u, 0x106aa070u, 0x19a4c116u,
    0x1e376c08u, 0x2748774cu, 0x34b0bcb5u, 0x391c0cb3u, 0x4ed8aa4au, 0x5b9cca4fu, 0x682e6ff3u,
    0x748f82eeu, 0x78a5636fu, 0x84c87814u, 0x8cc70208u, 0x90befffau, 0xa4506cebu, 0xbef9a3f7u,
    0xc67178f2u};

inline std::uint32_t rotr32(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

}  // namespace detail

// SHA-256 digest of a byte string, as lowercase hex.
inline std::string sha256_hex(std::string_view data) {
    std::array<std::uint32_t, 8> h = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
                                      0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};

    // Message plus 0x80, zero padding, and the 64-bit bit length.
    std::string msg(data);
    const std::uint64_t bit_length = static_cast<std::uint64_t>(msg.size()) * 8;
    msg.push_back(static_cast<char>(0x80));
    while (msg.size() % 64 != 56) msg.push_back('\0');
    for (int shift = 56; shift >= 0; shift -= 8)
        msg.push_back(static_cast<char>((bit_length >> shift) & 0xff));

    for (std::size_t block = 0; block < msg.size(); block += 64) {
        std::array<std::uint32_t, 64> w{};
        for (int i = 0; i < 16; ++i)
            w[static_cast<std::size_t>(i)] =
                (static_cast<std::uint32_t>(static_cast<unsigned char>(msg[block + 4 * i])) << 24) |
                (static_cast<std::uint32_t>(static_cast<unsigned char>(msg[block + 4 * i + 1]))
                 << 16) |
                (static_cast<std::uint32_t>(static_cast<unsigned char>(msg[block + 4 * i + 2]))
                 << 8) |
                static_cast<std::uint32_t>(static_cast<unsigned char>(msg[block + 4 * i + 3]));
        for (std::size_t i = 16; i < 64; ++i) {
            const std::uint32_t s0 = detail::rotr32(w[i - 15], 7) ^ detail::rotr32(w[i - 15], 18) ^
                                     (w[i - 15] >> 3);
            const std::uint32_t s1 =
                detail::rotr32(w[i - 2], 17) ^ detail::rotr32(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }

        auto [a, b, c, d, e, f, g, hh] = h;
        for (std::size_t i = 0; i < 64; ++i) {
            const std::uint32_t s1 =
                detail::rotr32(e, 6) ^ detail::rotr32(e, 11) ^ detail::rotr32(e, 25);
            const std::uint32_t ch = (e & f) ^ (~e & g);
            const std::uint32_t temp1 = hh + s1 + ch + detail::k_sha256_round[i] + w[i];
            const std::uint32_t s0 =
                detail::rotr32(a, 2) ^ detail::rotr32(a, 13) ^ detail::rotr32(a, 22);
            const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            const std::uint32_t temp2 = s0 + maj;
            hh = g;
            g = f;
            f = e;
            e = d + temp1;
            d = c;
            c = b;
            b = a;
            a = temp1 + temp2;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
        h[5] += f;
        h[6] += g;
        h[7] += hh;
    }

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (std::uint32_t word : h)
        for (int shift = 28; shift >= 0; shift -= 4) out.push_back(hex[(word >> shift) & 0xf]);
    return out;
}

inline std::string file_sha256(const std::filesystem::path& path) {
    return sha256_hex(read_text_file(path));
}

struct FileRecord {
    std::string name;  // path relative to the run directory
    std::string sha256;
    std::uint64_t bytes = 0;
};

inline void to_json(nlohmann::json& j, const FileRecord& r) {
    j = nlohmann::json{{"name", r.name}, {"sha256", r.sha256}, {"bytes", r.bytes}};
}

inline void from_json(const nlohmann::json& j, FileRecord& r) {
    r.name = j.at("name").get<std::string>();
    r.sha256 = j.at("sha256").get<std::string>();
    r.bytes = j.at("bytes").get<std::uint64_t>();
}

struct RunManifest {
    std::string tool_version = "0.1.0";
    std::string subcommand;
    std::string mode;  // train modes; empty elsewhere
    std::uint64_t seed = 0;
    nlohmann::json config = nlohmann::json::object();
    std::string config_sha256;
    std::vector<FileRecord> outputs;
};

inline void to_json(nlohmann::json& j, const RunManifest& m) {
    j = nlohmann::json{{"tool_version", m.tool_version}, {"subcommand", m.subcommand},
                       {"mode", m.mode},                 {"seed", m.seed},
                       {"config", m.config},             {"config_sha256", m.config_sha256},
                       {"outputs", m.outputs}};
}

inline void from_json(const nlohmann::json& j, RunManifest& m) {
    m.tool_version = j.at("tool_version").get<std::string>();
    m.subcommand = j.at("subcommand").get<std::string>();
    m.mode = j.at("mode").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = j.at("config");
    m.config_sha256 = j.at("config_sha256").get<std::string>();
    m.outputs = j.at("outputs").get<std::vector<FileRecord>>();
}

// Records one output file in the manifest. Call after the file is written;
// the manifest itself is written last and never lists itself.
inline void record_output(RunManifest& manifest, const std::filesystem::path& run_dir,
                          const std::string& relative_name) {
    const auto path = run_dir / relative_name;
    const std::string content = read_text_file(path);
    manifest.outputs.push_back(
        FileRecord{relative_name, sha256_hex(content), content.size()});
}

inline void write_manifest(const RunManifest& manifest, const std::filesystem::path& run_dir) {
    const nlohmann::json j = manifest;
    write_text_file(run_dir / "manifest.json", j.dump(2) + "\n");
}

inline RunManifest load_manifest(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    try {
        return j.get<RunManifest>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
}

// Compares the recorded outputs of two run directories byte for byte.
// Returns the relative names that differ or are missing; empty means the
// replay reproduced the original exactly.
inline std::vector<std::string> compare_run_outputs(const RunManifest& original,
                                                    const std::filesystem::path& original_dir,
                                                    const std::filesystem::path& replay_dir) {
    std::vector<std::string> differing;
    for (const auto& record : original.outputs) {
        const auto a = original_dir / record.name;
        const auto b = replay_dir / record.name;
        if (!std::filesystem::exists(a) || !std::filesystem::exists(b)) {
            differing.push_back(record.name);
            continue;
        }
        if (read_text_file(a) != read_text_file(b)) differing.push_back(record.name);
    }
    return differing;
}

}  // namespace dglab
