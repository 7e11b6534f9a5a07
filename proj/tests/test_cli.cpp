#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "mvq/codec.hpp"
#include "mvq/io.hpp"

namespace fs = std::filesystem;
using namespace mvq;

namespace {

struct Workspace {
    fs::path dir;
    fs::path cli;

    Workspace() {
        const char* cli_env = std::getenv("MVQ_CLI");
        REQUIRE_MESSAGE(cli_env != nullptr, "MVQ_CLI must point at the mvq binary");
        cli = cli_env;
        dir = fs::temp_directory_path() / ("mvq_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }

    int run(const std::string& args) const {
        const std::string cmd = cli.string() + " " + args + " >" + (dir / "stdout.log").string() +
                                " 2>" + (dir / "stderr.log").string();
        const int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    }

    fs::path write_tensor(const std::string& name, TensorShape shape, uint64_t seed) const {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> dist;
        std::vector<double> data(shape.count());
        for (auto& v : data) v = dist(rng);
        const fs::path manifest = dir / (name + ".tensor");
        write_tensor_manifest(manifest, NamedTensor{name, make_weight_tensor(shape, data)});
        return manifest;
    }

    fs::path write_text(const std::string& name, const std::string& content) const {
        const fs::path p = dir / name;
        std::ofstream(p) << content;
        return p;
    }
};

} // namespace

TEST_CASE("cli end-to-end") {
    Workspace ws;
    ws.write_tensor("convA", {32, 8, 3, 3}, 11);
    ws.write_tensor("convB", {64, 16, 1, 1}, 12);
    const fs::path cfg = ws.write_text("layers.cfg", "convA.tensor\nconvB.tensor k=16\n");

    SUBCASE("compress is deterministic at the byte level") {
        const std::string base = "compress --layers " + cfg.string() + " --d 16 --k 32 --qc 8";
        CHECK(ws.run(base + " --out " + (ws.dir / "m1.mvq").string()) == 0);
        CHECK(ws.run(base + " --out " + (ws.dir / "m2.mvq").string()) == 0);
        CHECK(read_file_bytes(ws.dir / "m1.mvq") == read_file_bytes(ws.dir / "m2.mvq"));

        SUBCASE("stats and reconstruct round the model trip") {
            CHECK(ws.run("stats --model " + (ws.dir / "m1.mvq").string()) == 0);
            CHECK(ws.run("stats --model " + (ws.dir / "m1.mvq").string() + " --ref " +
                         cfg.string()) == 0);
            CHECK(ws.run("reconstruct --model " + (ws.dir / "m1.mvq").string() + " --out " +
                         (ws.dir / "recon").string()) == 0);
            CHECK(fs::exists(ws.dir / "recon" / "layer000.tensor"));
            CHECK(fs::exists(ws.dir / "recon" / "layer001.bin"));

            // re-encoding the reconstruction keeps the mask stream
            const fs::path cfg2 = ws.write_text(
                "layers2.cfg", "recon/layer000.tensor\nrecon/layer001.tensor k=16\n");
            CHECK(ws.run("compress --layers " + cfg2.string() + " --d 16 --k 32 --qc 8 --out " +
                         (ws.dir / "m3.mvq").string()) == 0);
            const auto m1 = deserialize(read_file_bytes(ws.dir / "m1.mvq"));
            const auto m3 = deserialize(read_file_bytes(ws.dir / "m3.mvq"));
            REQUIRE(m1.size() == m3.size());
            for (std::size_t i = 0; i < m1.size(); ++i) CHECK(m1[i].mask_ids == m3[i].mask_ids);
        }
    }

    SUBCASE("excluded layers are skipped") {
        const fs::path cfg3 = ws.write_text("layers3.cfg", "convA.tensor\nconvB.tensor exclude\n");
        CHECK(ws.run("compress --layers " + cfg3.string() + " --d 16 --k 32 --out " +
                     (ws.dir / "m4.mvq").string()) == 0);
        CHECK(deserialize(read_file_bytes(ws.dir / "m4.mvq")).size() == 1);
    }

    SUBCASE("ablate prints a four-case table") {
        const fs::path manifest = ws.write_tensor("abl", {64, 8, 2, 2}, 13);
        CHECK(ws.run("ablate --input " + manifest.string() + " --ab-k 64 --cd-k 32") == 0);
    }

    SUBCASE("simulate writes reports") {
        const char* data_dir = std::getenv("MVQ_DATA_DIR");
        REQUIRE(data_dir != nullptr);
        const fs::path table = fs::path(data_dir) / "resnet18.layers";
        CHECK(ws.run("simulate --layers " + table.string() + " --out " +
                     (ws.dir / "rep").string()) == 0);
        CHECK(fs::exists(ws.dir / "rep" / "access.csv"));
        CHECK(fs::exists(ws.dir / "rep" / "energy.csv"));
        CHECK(fs::exists(ws.dir / "rep" / "roofline.csv"));
        CHECK(fs::exists(ws.dir / "rep" / "report.txt"));

        const fs::path empty = ws.write_text("empty.layers", "# nothing\n");
        CHECK(ws.run("simulate --layers " + empty.string() + " --out " +
                     (ws.dir / "rep2").string()) == 0);
    }

    SUBCASE("exit codes distinguish config, data, and parse failures") {
        CHECK(ws.run("compress") == 2);                        // missing required flag
        CHECK(ws.run("simulate --layers x --setting bogus") == 2);
        CHECK(ws.run("stats --model " + (ws.dir / "missing.mvq").string()) == 3);

        ws.write_text("garbage.mvq", "not a container");
        CHECK(ws.run("stats --model " + (ws.dir / "garbage.mvq").string()) == 3);

        const fs::path badcfg = ws.write_text("bad.cfg", "convA.tensor d=13\n");
        CHECK(ws.run("compress --layers " + badcfg.string() + " --out " +
                     (ws.dir / "bad.mvq").string()) == 3); // Cout % d != 0

        CHECK(ws.run("--help") == 0);
    }
}
