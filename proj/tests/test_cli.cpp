// SPDX-License-Identifier: Apache-2.0
//
// End-to-end tests of the titv executable.

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <sys/wait.h>

#include "test_util.hpp"

namespace titv {
namespace {

namespace fs = std::filesystem;
using testing::temp_dir;

struct CliResult {
    int code = -1;
    std::string out;
};

CliResult run(const std::string& args) {
    const std::string cmd = std::string(TITV_CLI_PATH) + " " + args + " 2>&1";
    CliResult r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

/// Value of a `key=value` output line.
std::string value_of(const std::string& out, const std::string& key) {
    const auto pos = out.find("\n" + key + "=");
    if (pos == std::string::npos) return {};
    const auto start = pos + key.size() + 2;
    return out.substr(start, out.find('\n', start) - start);
}

fs::path small_spec(const fs::path& dir) {
    const fs::path spec = dir / "spec.txt";
    write_file(spec.string(), "# small planted set\nfeatures = 3\nwindows = 4\nsamples = 200\n"
                              "weights = 2, -2, 1\nschedules = constant, constant, ramp\nscale = 3\nseed = 11\n");
    return spec;
}

fs::path synth_small(const fs::path& dir) {
    const CliResult r = run("synth --spec " + q(small_spec(dir)) + " --out-dir " + q(dir) + " --run-id data");
    EXPECT_EQ(r.code, 0) << r.out;
    return dir / "data.titv";
}

TEST(Cli, HelpAndMissingSubcommand) {
    EXPECT_EQ(run("--help").code, 0);
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
}

TEST(Cli, SynthWritesDatasetTruthAndManifest) {
    const fs::path dir = temp_dir("cli_synth");
    const fs::path data = synth_small(dir);
    const Dataset ds = load_dataset(data.string());
    EXPECT_EQ(ds.samples.size(), 200u);
    EXPECT_EQ(ds.windows, 4u);
    EXPECT_EQ(ds.feature_count(), 3u);
    const auto truth = nlohmann::json::parse(read_file(data.string() + ".truth.json"));
    EXPECT_EQ(truth["schedules"][2], "ramp");
    EXPECT_EQ(truth["importance"].size(), 4u);
    const auto manifest = nlohmann::json::parse(read_file((dir / "data.synth.manifest.json").string()));
    EXPECT_EQ(manifest["command"], "synth");
    EXPECT_EQ(manifest["config"]["samples"], 200);
    EXPECT_EQ(manifest["artifacts"].size(), 2u);
}

TEST(Cli, SynthSeedFlagOverridesSpec) {
    const fs::path dir = temp_dir("cli_synth_seed");
    const fs::path spec = small_spec(dir);
    ASSERT_EQ(run("synth --spec " + q(spec) + " --out-dir " + q(dir) + " --run-id a").code, 0);
    ASSERT_EQ(run("--seed 12 synth --spec " + q(spec) + " --out-dir " + q(dir) + " --run-id b").code, 0);
    EXPECT_FALSE(load_dataset((dir / "a.titv").string()) == load_dataset((dir / "b.titv").string()));
}

TEST(Cli, SynthSpecErrorsNameTheField) {
    const fs::path dir = temp_dir("cli_synth_bad");
    write_file((dir / "s.txt").string(), "features = 2\nschedules = constant, wiggle\n");
    const CliResult r = run("synth --spec " + q(dir / "s.txt") + " --out-dir " + q(dir));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("schedules"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("wiggle"), std::string::npos) << r.out;
    EXPECT_EQ(run("synth --spec " + q(dir / "none.txt")).code, 3);
}

TEST(Cli, TrainEvaluateInterpretBaseline) {
    const fs::path dir = temp_dir("cli_pipeline");
    const fs::path data = synth_small(dir);
    const std::string common = "--seed 3 --out-dir " + q(dir);
    const CliResult tr = run(common + " train --data " + q(data) + " --epochs 3 --rnn-dim 3 --film-dim 3 --run-id m");
    ASSERT_EQ(tr.code, 0) << tr.out;
    EXPECT_EQ(value_of(tr.out, "epochs"), "3");
    ASSERT_TRUE(fs::exists(dir / "m.ckpt.json"));
    const std::string hist = read_file((dir / "m.history.csv").string());
    EXPECT_EQ(hist.substr(0, hist.find('\n')), "epoch,train_loss,val_loss,val_auc");
    EXPECT_EQ(std::count(hist.begin(), hist.end(), '\n'), 4);

    const Checkpoint ck = load_checkpoint((dir / "m.ckpt.json").string());
    EXPECT_EQ(ck.split_seed, 3u);
    EXPECT_EQ(ck.dataset_digest, digest(read_file(data.string())));
    EXPECT_EQ(ck.model.rnn_dim, 3u);

    const CliResult ev = run(common + " evaluate --checkpoint " + q(dir / "m.ckpt.json") + " --data " + q(data));
    ASSERT_EQ(ev.code, 0) << ev.out;
    EXPECT_EQ(value_of(ev.out, "test_auc"), value_of(tr.out, "test_auc"));
    EXPECT_EQ(value_of(ev.out, "test_samples"), "20");

    const CliResult pt = run(common + " interpret --checkpoint " + q(dir / "m.ckpt.json") + " --data " + q(data) +
                       " --mode patient --sample 7 --features f1,f3");
    ASSERT_EQ(pt.code, 0) << pt.out;
    const auto recs = records_from_csv(read_file((dir / "m.patient.7.csv").string()));
    ASSERT_EQ(recs.size(), 8u);
    EXPECT_EQ(recs[0].feature_name, "f1");
    EXPECT_EQ(recs[7].feature_name, "f3");

    const CliResult ft = run(common + " interpret --checkpoint " + q(dir / "m.ckpt.json") + " --data " + q(data) +
                       " --mode feature --feature f2 --format json");
    ASSERT_EQ(ft.code, 0) << ft.out;
    const auto j = nlohmann::json::parse(read_file((dir / "m.feature.f2.json").string()));
    EXPECT_EQ(j["windows"].size(), 4u);

    EXPECT_EQ(run(common + " interpret --checkpoint " + q(dir / "m.ckpt.json") + " --data " + q(data) +
                  " --mode patient --sample nobody")
                  .code,
              2);
    EXPECT_EQ(run(common + " interpret --checkpoint " + q(dir / "m.ckpt.json") + " --data " + q(data) +
                  " --mode sideways")
                  .code,
              2);

    const CliResult bl = run(common + " baseline --data " + q(data) + " --epochs 3 --per-window --run-id lr");
    ASSERT_EQ(bl.code, 0) << bl.out;
    const std::string table = read_file((dir / "lr.per_window.csv").string());
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 13);
}

TEST(Cli, TrainIsIndependentOfThreadCount) {
    const fs::path dir = temp_dir("cli_threads");
    const fs::path data = synth_small(dir);
    const std::string base = "--seed 5 --out-dir " + q(dir);
    const std::string args = " train --data " + q(data) + " --epochs 2 --rnn-dim 2 --film-dim 2 --batch-size 16";
    ASSERT_EQ(run(base + " --threads 1 --run-id a" + args).code, 0);
    ASSERT_EQ(run(base + " --threads 3 --run-id b" + args).code, 0);
    EXPECT_EQ(read_file((dir / "a.ckpt.json").string()), read_file((dir / "b.ckpt.json").string()));
    EXPECT_EQ(read_file((dir / "a.history.csv").string()), read_file((dir / "b.history.csv").string()));
}

TEST(Cli, ConfigFileAndOverrides) {
    const fs::path dir = temp_dir("cli_config");
    const fs::path data = synth_small(dir);
    write_file((dir / "c.cfg").string(), "epochs = 2\nrnn-dim = 2\nfilm-dim = 2\nseed = 4\n");
    const CliResult a = run("--config " + q(dir / "c.cfg") + " --out-dir " + q(dir) + " train --data " + q(data) +
                      " --run-id a");
    ASSERT_EQ(a.code, 0) << a.out;
    EXPECT_EQ(value_of(a.out, "epochs"), "2");
    EXPECT_EQ(load_checkpoint((dir / "a.ckpt.json").string()).split_seed, 4u);
    const CliResult b = run("--config " + q(dir / "c.cfg") + " --out-dir " + q(dir) + " train --data " + q(data) +
                      " --run-id b --epochs 1");
    ASSERT_EQ(b.code, 0) << b.out;
    EXPECT_EQ(value_of(b.out, "epochs"), "1");

    write_file((dir / "bad.cfg").string(), "epochs = 2\nlearning-rat = 0.1\n");
    const CliResult c = run("--config " + q(dir / "bad.cfg") + " train --data " + q(data));
    EXPECT_EQ(c.code, 2);
    EXPECT_NE(c.out.find(":2:"), std::string::npos) << c.out;
    EXPECT_NE(c.out.find("learning-rat"), std::string::npos) << c.out;
}

TEST(Cli, ValidationFailuresExitWithTwo) {
    const fs::path dir = temp_dir("cli_invalid");
    const fs::path data = synth_small(dir);
    const std::string base = "--out-dir " + q(dir) + " train --data " + q(data) + " --epochs 1";
    const CliResult v = run(base + " --variant both");
    EXPECT_EQ(v.code, 2);
    EXPECT_NE(v.out.find("both"), std::string::npos) << v.out;
    EXPECT_EQ(run(base + " --learning-rate -1").code, 2);
    EXPECT_EQ(run(base + " --optimizer lbfgs").code, 2);
    EXPECT_EQ(run(base + " --epochs notanumber").code, 2);
    EXPECT_EQ(run("--out-dir " + q(dir) + " train --data " + q(dir / "missing.titv")).code, 3);
    write_file((dir / "junk.titv").string(), "not a dataset");
    EXPECT_NE(run("--out-dir " + q(dir) + " train --data " + q(dir / "junk.titv")).code, 0);
}

TEST(Cli, IngestBuildsWindowedDataset) {
    const fs::path dir = temp_dir("cli_ingest");
    write_file((dir / "events.csv").string(), "entity_id,timestamp,feature,value\n"
                                              "p1,0,hr,80\np1,5,hr,90\np1,12,bp,120\n"
                                              "p2,100,hr,70\np2,115,bp,110\n");
    write_file((dir / "labels.csv").string(), "entity_id,label,window_start\np1,1,0\np2,0,100\n");
    const CliResult r = run("--out-dir " + q(dir) + " ingest --events " + q(dir / "events.csv") + " --labels " +
                      q(dir / "labels.csv") + " --feature-window 20 --window 10 --features hr,bp --run-id ing");
    ASSERT_EQ(r.code, 0) << r.out;
    const Dataset ds = load_dataset((dir / "ing.titv").string());
    ASSERT_EQ(ds.samples.size(), 2u);
    EXPECT_EQ(ds.windows, 2u);
    EXPECT_EQ(ds.features.names(), (std::vector<std::string>{"hr", "bp"}));
    EXPECT_EQ(ds.samples[0].x(0, 0), 85.0);
    EXPECT_EQ(ds.samples[0].x(1, 1), 120.0);
    EXPECT_EQ(ds.samples[1].label, 0.0);

    const CliResult bad = run("--out-dir " + q(dir) + " ingest --events " + q(dir / "events.csv") + " --labels " +
                        q(dir / "labels.csv") + " --feature-window 20 --window 10 --features hr");
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.out.find("bp"), std::string::npos) << bad.out;
}

TEST(Cli, VerifyScopes) {
    const CliResult f = run("verify --scope film --film-instances 20");
    EXPECT_EQ(f.code, 0) << f.out;
    EXPECT_NE(f.out.find("PASS film-identity"), std::string::npos) << f.out;
    const CliResult i = run("verify --scope identity --trials 50");
    EXPECT_EQ(i.code, 0) << i.out;
    EXPECT_NE(i.out.find("PASS identity"), std::string::npos);
    const CliResult g = run("verify --scope gradcheck --grad-seeds 3");
    EXPECT_EQ(g.code, 0) << g.out;
    EXPECT_EQ(run("verify --scope nothing").code, 2);
}

} // namespace
} // namespace titv
