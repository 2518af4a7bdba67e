#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <string>

#include "dglab/errors.hpp"
#include "dglab/io.hpp"
#include "dglab/manifest.hpp"

using namespace dglab;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "dglab_manifest_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("sha256 matches published test vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    CHECK(sha256_hex(std::string(1000000, 'a')) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("sha256 handles lengths around the block boundary") {
    // 55, 56, and 64 bytes exercise the three padding layouts.
    CHECK(sha256_hex(std::string(55, 'x')) != sha256_hex(std::string(56, 'x')));
    CHECK(sha256_hex(std::string(64, 'x')).size() == 64);
    for (const std::size_t n : {55u, 56u, 57u, 63u, 64u, 65u})
        CHECK(sha256_hex(std::string(n, 'q')) == sha256_hex(std::string(n, 'q')));
}

TEST_CASE("file hashing matches string hashing") {
    const auto dir = fresh_dir("hash");
    write_text_file(dir / "a.txt", "histogram mass\n");
    CHECK(file_sha256(dir / "a.txt") == sha256_hex("histogram mass\n"));
}

TEST_CASE("manifest survives a write and load round trip") {
    const auto dir = fresh_dir("roundtrip");
    write_text_file(dir / "report.json", "{\"answer\": 2.0}\n");
    write_text_file(dir / "metrics.csv", "epoch,loss\n0,1.5\n");

    RunManifest manifest;
    manifest.subcommand = "train";
    manifest.mode = "dann";
    manifest.seed = 42;
    manifest.config = nlohmann::json{{"epochs", 3}};
    manifest.config_sha256 = sha256_hex(manifest.config.dump());
    record_output(manifest, dir, "report.json");
    record_output(manifest, dir, "metrics.csv");
    write_manifest(manifest, dir);

    const RunManifest loaded = load_manifest(dir / "manifest.json");
    CHECK(loaded.subcommand == "train");
    CHECK(loaded.mode == "dann");
    CHECK(loaded.seed == 42);
    CHECK(loaded.config == manifest.config);
    CHECK(loaded.config_sha256 == manifest.config_sha256);
    REQUIRE(loaded.outputs.size() == 2);
    CHECK(loaded.outputs[0].name == "report.json");
    CHECK(loaded.outputs[0].sha256 == sha256_hex("{\"answer\": 2.0}\n"));
    CHECK(loaded.outputs[0].bytes == std::string("{\"answer\": 2.0}\n").size());
    CHECK(loaded.outputs[1].name == "metrics.csv");
}

TEST_CASE("manifest load rejects malformed input") {
    const auto dir = fresh_dir("malformed");
    write_text_file(dir / "manifest.json", "not json at all");
    CHECK_THROWS_AS(load_manifest(dir / "manifest.json"), ParseError);
    write_text_file(dir / "manifest.json", "{\"subcommand\": 7}");
    CHECK_THROWS_AS(load_manifest(dir / "manifest.json"), ParseError);
    CHECK_THROWS_AS(load_manifest(dir / "missing.json"), ParseError);
}

TEST_CASE("output comparison flags differing and missing files") {
    const auto original = fresh_dir("cmp_original");
    const auto replay = fresh_dir("cmp_replay");
    write_text_file(original / "same.txt", "alpha");
    write_text_file(original / "changed.txt", "beta");
    write_text_file(original / "gone.txt", "gamma");
    write_text_file(replay / "same.txt", "alpha");
    write_text_file(replay / "changed.txt", "BETA");

    RunManifest manifest;
    manifest.subcommand = "geometry";
    record_output(manifest, original, "same.txt");
    record_output(manifest, original, "changed.txt");
    record_output(manifest, original, "gone.txt");

    const auto differing = compare_run_outputs(manifest, original, replay);
    REQUIRE(differing.size() == 2);
    CHECK(differing[0] == "changed.txt");
    CHECK(differing[1] == "gone.txt");

    write_text_file(replay / "changed.txt", "beta");
    write_text_file(replay / "gone.txt", "gamma");
    CHECK(compare_run_outputs(manifest, original, replay).empty());
}

TEST_CASE("manifest json has no volatile fields") {
    RunManifest manifest;
    manifest.subcommand = "verify";
    nlohmann::json j = manifest;
    const std::string text = j.dump();
    CHECK(text.find("time") == std::string::npos);
    CHECK(text.find("date") == std::string::npos);
    nlohmann::json again = manifest;
    CHECK(again.dump() == text);
}
