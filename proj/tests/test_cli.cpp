#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "falcon/bytes.hpp"
#include "falcon/flow_image.hpp"
#include "support/fixtures.hpp"

// Drives the installed binary through std::system; FALCON_BIN points at the
// build artifact (set by ctest).

namespace {

std::string falcon_bin() {
  const char* env = std::getenv("FALCON_BIN");
  return env ? env : "falcon";
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  const std::string log = (std::filesystem::temp_directory_path() / "falcon-cli-out.txt").string();
  const int status = std::system((falcon_bin() + " " + args + " >" + log + " 2>&1").c_str());
  if (output) {
    std::ifstream in(log);
    std::ostringstream buf;
    buf << in.rdbuf();
    *output = buf.str();
  }
  return WEXITSTATUS(status);
}

double metric_from_csv(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(name + ",", 0) == 0) return std::stod(line.substr(name.size() + 1));
  }
  FAIL("metric ", name, " not found in ", path);
  return 0.0;
}

}  // namespace

TEST_CASE("cli: no subcommand is a usage error (exit 1)") {
  CHECK(run_cli("") == 1);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("split --in only-in-given") == 1);  // missing required --out
}

TEST_CASE("cli: data problems exit with 2") {
  fixtures::TempDir tmp("cli-exit2");
  CHECK(run_cli("split --in " + tmp.file("absent.pcap") + " --out " + tmp.file("flows")) == 2);

  falcon::Bytes junk = {0xde, 0xad, 0xbe, 0xef};
  junk.resize(30, 0);
  falcon::write_file(tmp.file("junk.pcap"), junk);
  std::string output;
  CHECK(run_cli("split --in " + tmp.file("junk.pcap") + " --out " + tmp.file("flows"),
                &output) == 2);
  CHECK(output.find("BadMagic") != std::string::npos);
}

TEST_CASE("cli: split writes one file per flow plus the run manifest") {
  fixtures::TempDir tmp("cli-split");
  auto pcap = fixtures::three_udp_capture();
  falcon::write_file(tmp.file("three.pcap"), pcap.data);

  CHECK(run_cli("split --in " + tmp.file("three.pcap") + " --out " + tmp.file("flows")) == 0);
  CHECK(std::filesystem::exists(tmp.file("flows/flow_00000.bin")));
  CHECK(std::filesystem::exists(tmp.file("flows/flow_00001.bin")));
  CHECK(std::filesystem::exists(tmp.file("flows/flow_00002.bin")));
  CHECK(!std::filesystem::exists(tmp.file("flows/flow_00003.bin")));
  CHECK(std::filesystem::exists(tmp.file("flows/manifest.json")));
  CHECK(std::filesystem::exists(tmp.file("flows/flows.tsv")));

  // flow files carry the 13-byte tuple prefix
  const auto flow0 = falcon::read_file(tmp.file("flows/flow_00000.bin"));
  CHECK(flow0.size() > 13);
  CHECK(flow0[0] == 10);  // 10.0.0.x fixtures
}

TEST_CASE("cli: overwrite guard trips on config changes and yields to --force") {
  fixtures::TempDir tmp("cli-guard");
  auto pcap = fixtures::three_udp_capture();
  falcon::write_file(tmp.file("three.pcap"), pcap.data);
  const std::string base = "split --in " + tmp.file("three.pcap") + " --out " + tmp.file("f");

  CHECK(run_cli(base) == 0);
  CHECK(run_cli(base) == 0);  // identical config re-runs fine
  std::string output;
  CHECK(run_cli(base + " --unidirectional", &output) == 2);
  CHECK(output.find("different configuration") != std::string::npos);
  CHECK(run_cli(base + " --unidirectional --force") == 0);
}

TEST_CASE("cli: imageize emits 784-byte records and PGM previews") {
  fixtures::TempDir tmp("cli-img");
  auto pcap = fixtures::three_udp_capture();
  falcon::write_file(tmp.file("three.pcap"), pcap.data);
  CHECK(run_cli("imageize --in " + tmp.file("three.pcap") + " --out " + tmp.file("imgs") +
                " --pgm") == 0);
  CHECK(falcon::read_file(tmp.file("imgs/flow_00000.bin")).size() == 784);
  const auto pgm = falcon::read_file(tmp.file("imgs/flow_00001.pgm"));
  const std::string header = "P5\n28 28\n255\n";
  CHECK(pgm.size() == header.size() + 784);
}

TEST_CASE("cli: evaluate over a predictions file that matches its labels scores 1.0") {
  fixtures::TempDir tmp("cli-eval");
  {
    std::ofstream out(tmp.file("preds.csv"));
    out << "id,label,pred\n";
    for (int i = 0; i < 10; ++i) out << "s" << i << ',' << i % 3 << ',' << i % 3 << '\n';
  }
  CHECK(run_cli("evaluate --preds " + tmp.file("preds.csv") + " --out " +
                tmp.file("metrics.csv")) == 0);
  CHECK(metric_from_csv(tmp.file("metrics.csv"), "accuracy") == 1.0);
  CHECK(metric_from_csv(tmp.file("metrics.csv"), "f1_weighted") == 1.0);
}

TEST_CASE("cli: synth blobs twice with one seed is byte-identical") {
  fixtures::TempDir tmp("cli-synth");
  CHECK(run_cli("synth --task blobs --n 200 --seed 7 --out " + tmp.file("a")) == 0);
  CHECK(run_cli("synth --task blobs --n 200 --seed 7 --out " + tmp.file("b")) == 0);
  CHECK(falcon::read_file(tmp.file("a/blobs.csv")) == falcon::read_file(tmp.file("b/blobs.csv")));

  CHECK(run_cli("synth --task blobs --n 200 --seed 8 --out " + tmp.file("c")) == 0);
  CHECK(falcon::read_file(tmp.file("a/blobs.csv")) != falcon::read_file(tmp.file("c/blobs.csv")));
}

TEST_CASE("cli: FALCON_SEED environment variable seeds a run") {
  fixtures::TempDir tmp("cli-envseed");
  const std::string log = tmp.file("out.txt");
  const int status = std::system(("FALCON_SEED=4242 " + falcon_bin() + " synth --task blobs" +
                                  " --n 10 --out " + tmp.file("s") + " >" + log + " 2>&1")
                                     .c_str());
  CHECK(WEXITSTATUS(status) == 0);
  const auto manifest = falcon::read_file(tmp.file("s/manifest.json"));
  const std::string text(manifest.begin(), manifest.end());
  CHECK(text.find("\"seed\": 4242") != std::string::npos);
}

TEST_CASE("cli: config file values apply under the subcommand section, flags win") {
  fixtures::TempDir tmp("cli-config");
  {
    std::ofstream out(tmp.file("falcon.ini"));
    out << "[synth]\nn=5\nseed=99\n";
  }
  CHECK(run_cli("--config " + tmp.file("falcon.ini") + " synth --task blobs --out " +
                tmp.file("s")) == 0);
  {
    const auto manifest = falcon::read_file(tmp.file("s/manifest.json"));
    const std::string text(manifest.begin(), manifest.end());
    CHECK(text.find("\"seed\": 99") != std::string::npos);
    CHECK(text.find("\"n\": \"5\"") != std::string::npos);
  }
  // flag overrides the file value
  CHECK(run_cli("--config " + tmp.file("falcon.ini") + " synth --task blobs --seed 3 --out " +
                tmp.file("t")) == 0);
  {
    const auto manifest = falcon::read_file(tmp.file("t/manifest.json"));
    const std::string text(manifest.begin(), manifest.end());
    CHECK(text.find("\"seed\": 3") != std::string::npos);
  }
  // unknown keys are rejected
  {
    std::ofstream out(tmp.file("bad.ini"));
    out << "[synth]\nnonsense=1\n";
  }
  CHECK(run_cli("--config " + tmp.file("bad.ini") + " synth --task blobs --out " +
                tmp.file("u")) == 1);
}

TEST_CASE("cli: payload-only split drops headers from flow records") {
  fixtures::TempDir tmp("cli-payload");
  auto pcap = fixtures::three_udp_capture();
  falcon::write_file(tmp.file("three.pcap"), pcap.data);
  CHECK(run_cli("split --in " + tmp.file("three.pcap") + " --out " + tmp.file("full")) == 0);
  CHECK(run_cli("split --in " + tmp.file("three.pcap") + " --out " + tmp.file("bare") +
                " --payload-only") == 0);
  const auto full = falcon::read_file(tmp.file("full/flow_00000.bin"));
  const auto bare = falcon::read_file(tmp.file("bare/flow_00000.bin"));
  CHECK(full.size() == 13 + 28 + 2);  // tuple + IP + UDP + 2-byte payload
  CHECK(bare.size() == 13 + 2);
}

#include "falcon/fusion.hpp"
#include "falcon/net_pipeline.hpp"

TEST_CASE("cli: subcommand composition equals the monolithic pipeline operation") {
  fixtures::TempDir tmp("cli-compose");
  auto cap_a = fixtures::three_udp_capture();
  falcon::write_file(tmp.file("a.pcap"), cap_a.data);
  fixtures::PcapBuilder cap_b;
  cap_b.add_record(200, 0,
                   fixtures::ethernet_frame(
                       0x0800, fixtures::ipv4_packet(6, fixtures::ip(10, 9, 9, 9), 443,
                                                     fixtures::ip(10, 8, 8, 8), 50000,
                                                     {0x41, 0x42})));
  falcon::write_file(tmp.file("b.pcap"), cap_b.data);
  {
    std::ofstream labels(tmp.file("labels.csv"));
    labels << "capture,label\na.pcap,0\nb.pcap,1\n";
  }

  REQUIRE(run_cli("build-corpus --in " + tmp.path.string() + " --labels " +
                  tmp.file("labels.csv") + " --out " + tmp.file("corpus")) == 0);
  REQUIRE(run_cli("train-cnn --corpus " + tmp.file("corpus") + " --out " + tmp.file("cnn.ckpt") +
                  " --c1 2 --c2 4 --epochs 0 --seed 3") == 0);
  REQUIRE(run_cli("embed-net --corpus " + tmp.file("corpus") + " --cnn " + tmp.file("cnn.ckpt") +
                  " --out " + tmp.file("seqs")) == 0);
  REQUIRE(run_cli("train-bilstm --seqs " + tmp.file("seqs") + " --out " + tmp.file("lstm.ckpt") +
                  " --hidden 6 --epochs 0 --seed 4") == 0);
  REQUIRE(run_cli("embed-net --corpus " + tmp.file("corpus") + " --cnn " + tmp.file("cnn.ckpt") +
                  " --bilstm " + tmp.file("lstm.ckpt") + " --out " + tmp.file("net.csv")) == 0);

  // the monolithic library operation over the same capture and checkpoints
  const auto cnn = falcon::net::CnnModel::load(tmp.file("cnn.ckpt"));
  const auto bilstm = falcon::net::BiLstmModel::load(tmp.file("lstm.ckpt"));
  const auto direct =
      falcon::net::network_feature_pipeline(tmp.file("a.pcap"), cnn, bilstm);

  const auto table = falcon::fuse::read_feature_csv(tmp.file("net.csv"));
  REQUIRE(table.size() == 2);
  REQUIRE(table.ids[0] == "a");
  REQUIRE(table.features[0].size() == direct.size());
  for (std::size_t i = 0; i < direct.size(); ++i)
    CHECK(table.features[0][i] == direct[i]);  // %.17g csv round trip is exact
}
