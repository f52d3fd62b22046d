#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "reloc/camera.hpp"
#include "reloc/io.hpp"
#include "reloc/pipeline.hpp"
#include "sim.hpp"

using namespace reloc;
using namespace relocsim;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::filesystem::path scratch_root() {
  static const std::filesystem::path root = [] {
    const auto p = std::filesystem::temp_directory_path() /
                   ("reloc_cli_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    std::atexit([] {
      std::filesystem::remove_all(std::filesystem::temp_directory_path() /
                                  ("reloc_cli_" + std::to_string(::getpid())));
    });
    return p;
  }();
  return root;
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const auto out_file = scratch_root() / ("out_" + std::to_string(counter));
  const auto err_file = scratch_root() / ("err_" + std::to_string(counter));
  ++counter;
  const std::string cmd = std::string("\"") + RELOC_BIN + "\" " + args + " > " +
                          out_file.string() + " 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_text_file(out_file);
  result.err = read_text_file(err_file);
  return result;
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(": ");
    if (colon == std::string::npos) continue;
    kv[line.substr(0, colon)] = line.substr(colon + 2);
  }
  return kv;
}

std::string strip_time_lines(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("time.", 0) != 0) out << line << "\n";
  return out.str();
}

// One world shared by every case; databases, model, and query files are
// written once and reused read-only.
struct CliFixture {
  std::filesystem::path input, db, empty_db, queries, calib, svc, samples;
  SimWorld world = make_world(4, 20240817);
  SimQuery genuine = make_query(world, QueryKind::genuine, 1, 4242);
  SimQuery corrupted = make_query(world, QueryKind::corrupted, 2, 1717);
  SimQuery unrelated = make_query(world, QueryKind::unrelated, -1, 33);

  CliFixture() {
    const auto root = scratch_root();
    input = root / "input";
    db = root / "db";
    empty_db = root / "empty_db";
    queries = root / "queries";
    calib = root / "calib.txt";
    svc = root / "model.svc";
    samples = root / "samples.txt";
    std::filesystem::create_directories(input);
    std::filesystem::create_directories(queries);
    std::filesystem::create_directories(root / "empty_input");

    write_database_inputs(world, input);
    save_camera_calibration(calib, sim_camera());

    VerifyParams params;
    params.target_superpixels = 150;
    params.top_k = 12;
    save_svc_samples(samples, collect_svc_samples(world, 2, params));

    write_text_file(root / "fixture.conf",
                    "registration.inlier_threshold = 0.7\n"
                    "registration.icp_resolution = 0.1\n"
                    "verification.target_superpixels = 150\n"
                    "verification.top_k = 12\n");

    save_cloud(queries / "genuine.r3pc", genuine.cloud);
    save_ppm(queries / "genuine.ppm", genuine.image);
    save_cloud(queries / "corrupted.r3pc", corrupted.cloud);
    save_ppm(queries / "corrupted.ppm", corrupted.image);
    save_cloud(queries / "unrelated.r3pc", unrelated.cloud);
    save_ppm(queries / "unrelated.ppm", unrelated.image);

    std::vector<QuerySpec> specs(3);
    specs[0] = {100, Verdict::matched, genuine.true_world_pose,
                "genuine.r3pc", "genuine.ppm"};
    specs[1] = {101, Verdict::mismatched, corrupted.true_world_pose,
                "corrupted.r3pc", "corrupted.ppm"};
    specs[2] = {102, Verdict::unmatched, unrelated.true_world_pose,
                "unrelated.r3pc", "unrelated.ppm"};
    save_query_manifest(queries / "queries.txt", specs);

    run_cli("build-db --input " + input.string() + " --db " + db.string() +
            conf());
    run_cli("build-db --input " + (root / "empty_input").string() + " --db " +
            empty_db.string() + conf());
    run_cli("train-svc --samples " + samples.string() + " --out " +
            svc.string());
  }

  std::string conf() const {
    return " --config " + (scratch_root() / "fixture.conf").string();
  }
  std::string reloc_args(const std::string& stem, std::int64_t query_id) const {
    return "relocalise --db " + db.string() + " --cloud " +
           (queries / (stem + ".r3pc")).string() + " --image " +
           (queries / (stem + ".ppm")).string() + " --calib " + calib.string() +
           " --svc " + svc.string() + " --query-id " +
           std::to_string(query_id) + conf();
  }
};

const CliFixture& fixture() {
  static const CliFixture f;
  return f;
}

}  // namespace

TEST_CASE("build-db ingests the submaps and is idempotent") {
  const auto& f = fixture();
  const RunResult first = run_cli("build-db --input " + f.input.string() +
                                  " --db " + f.db.string() + f.conf());
  CHECK(first.exit_code == 0);
  const auto kv = parse_kv(first.out);
  CHECK(kv.at("records") == "4");
  CHECK(kv.count("warning.0") == 0);
  const std::string index_before = read_text_file(f.db / "index.txt");

  const RunResult again = run_cli("build-db --input " + f.input.string() +
                                  " --db " + f.db.string() + f.conf());
  CHECK(again.exit_code == 0);
  CHECK(read_text_file(f.db / "index.txt") == index_before);
}

TEST_CASE("build-db on an empty directory warns and writes an empty database") {
  const auto& f = fixture();
  const RunResult r =
      run_cli("build-db --input " + (scratch_root() / "empty_input").string() +
              " --db " + f.empty_db.string() + f.conf());
  CHECK(r.exit_code == 0);
  const auto kv = parse_kv(r.out);
  CHECK(kv.at("records") == "0");
  CHECK(kv.at("warning.0").find("empty database") != std::string::npos);
  CHECK(std::filesystem::exists(f.empty_db / "index.txt"));
}

TEST_CASE("build-db with a corrupt cloud exits 2 naming the file") {
  const auto root = scratch_root();
  const auto bad_input = root / "bad_input";
  std::filesystem::create_directories(bad_input);
  const auto& f = fixture();
  write_text_file(bad_input / "poses.txt",
                  "session sim\nsubmap 0 " +
                      format_transform(f.world.root_world[0]) + "\n");
  write_text_file(bad_input / "submap_0.r3pc", "R3PCgarbage");
  const RunResult r = run_cli("build-db --input " + bad_input.string() +
                              " --db " + (root / "bad_db").string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("submap_0.r3pc") != std::string::npos);
}

TEST_CASE("train-svc fits the verdict classifier from a samples file") {
  const auto& f = fixture();
  const auto retrained = scratch_root() / "model2.svc";
  const RunResult r = run_cli("train-svc --samples " + f.samples.string() +
                              " --out " + retrained.string());
  CHECK(r.exit_code == 0);
  const auto kv = parse_kv(r.out);
  CHECK(std::stoi(kv.at("samples")) == 24);
  CHECK(std::stod(kv.at("accuracy")) >= 0.95);
  CHECK(read_text_file(retrained) == read_text_file(f.svc));

  const auto single = scratch_root() / "single_class.txt";
  write_text_file(single, "0.9 0.9 matched\n0.8 0.95 matched\n");
  const RunResult bad = run_cli("train-svc --samples " + single.string() +
                                " --out " + (scratch_root() / "x.svc").string());
  CHECK(bad.exit_code == 2);
  CHECK(bad.err.find("error:") != std::string::npos);
}

TEST_CASE("relocalise accepts a genuine revisit and emits an accurate edge") {
  const auto& f = fixture();
  const RunResult r = run_cli(f.reloc_args("genuine", 77));
  CHECK(r.exit_code == 0);
  const auto kv = parse_kv(r.out);
  CHECK(kv.at("candidate.0.id") == "1");
  CHECK(kv.at("registration") == "ok");
  CHECK(kv.at("verdict") == "matched");
  CHECK(kv.at("accepted") == "true");
  CHECK(std::stod(kv.at("mcs")) > 0.6);
  CHECK(std::stod(kv.at("time.total")) > 0.0);

  std::string edge_line;
  std::istringstream lines(r.out);
  for (std::string line; std::getline(lines, line);)
    if (line.rfind("edge ", 0) == 0) edge_line = line;
  REQUIRE(!edge_line.empty());
  const auto tokens = split_tokens(edge_line);
  REQUIRE(tokens.size() == 10);
  CHECK(tokens[1] == "1");
  CHECK(tokens[2] == "77");
  const RigidTransform estimate = parse_transform(tokens, 3);
  CHECK(rotation_error(estimate, f.genuine.true_relative) <
        0.5 * 3.14159265358979 / 180.0);
  CHECK(translation_error(estimate, f.genuine.true_relative) < 0.05);

  const RunResult rerun = run_cli(f.reloc_args("genuine", 77));
  CHECK(rerun.exit_code == 0);
  CHECK(strip_time_lines(rerun.out) == strip_time_lines(r.out));
}

TEST_CASE("relocalise reports the same result as JSON") {
  const auto& f = fixture();
  const RunResult r = run_cli(f.reloc_args("genuine", 77) + " --json");
  CHECK(r.exit_code == 0);
  const auto body = nlohmann::json::parse(r.out);
  CHECK(body.at("query") == 77);
  CHECK(body.at("candidate.0.id") == 1);
  CHECK(body.at("verdict") == "matched");
  CHECK(body.at("accepted") == true);
  CHECK(body.at("edge").get<std::string>().rfind("edge 1 77 ", 0) == 0);
  CHECK(body.at("time.total").get<double>() > 0.0);
}

TEST_CASE("relocalise rejects a drifted frame as mismatched without any edge") {
  const auto& f = fixture();
  const RunResult r = run_cli(f.reloc_args("corrupted", 78));
  CHECK(r.exit_code == 1);
  const auto kv = parse_kv(r.out);
  CHECK(kv.at("verdict") == "mismatched");
  CHECK(kv.at("accepted") == "false");
  CHECK(r.out.find("edge") == std::string::npos);
  CHECK(r.err.find("edge") == std::string::npos);
}

TEST_CASE("relocalise rejects an unrelated scene as unmatched without any edge") {
  const auto& f = fixture();
  const RunResult r = run_cli(f.reloc_args("unrelated", 79));
  CHECK(r.exit_code == 1);
  const auto kv = parse_kv(r.out);
  CHECK(kv.at("verdict") == "unmatched");
  CHECK(kv.at("accepted") == "false");
  CHECK(r.out.find("edge") == std::string::npos);
}

TEST_CASE("relocalise against an empty database exits 2") {
  const auto& f = fixture();
  const RunResult r = run_cli(
      "relocalise --db " + f.empty_db.string() + " --cloud " +
      (f.queries / "genuine.r3pc").string() + " --image " +
      (f.queries / "genuine.ppm").string() + " --calib " + f.calib.string() +
      " --svc " + f.svc.string() + f.conf());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("empty database") != std::string::npos);
  CHECK(r.out.find("edge") == std::string::npos);
}

TEST_CASE("evaluate scores the query set and writes CSV data") {
  const auto& f = fixture();
  const auto csv_dir = scratch_root() / "csv";
  const RunResult r = run_cli("evaluate --db " + f.db.string() + " --queries " +
                              f.queries.string() + " --calib " +
                              f.calib.string() + " --svc " + f.svc.string() +
                              " --csv-dir " + csv_dir.string() + f.conf());
  CHECK(r.exit_code == 0);
  const auto kv = parse_kv(r.out);
  CHECK(kv.at("queries") == "3");
  CHECK(std::stod(kv.at("recall.1")) == 1.0);
  CHECK(std::stod(kv.at("success_rate")) == doctest::Approx(0.5));
  CHECK(kv.at("confusion.matched.matched") == "1");
  CHECK(kv.at("confusion.mismatched.mismatched") == "1");
  CHECK(kv.at("confusion.unmatched.unmatched") == "1");
  CHECK(kv.at("query.100.predicted") == "matched");
  CHECK(kv.at("query.101.predicted") == "mismatched");
  CHECK(kv.at("query.102.predicted") == "unmatched");
  CHECK(kv.count("time.total.mean") == 1);
  CHECK(kv.count("time.total.std") == 1);
  CHECK(read_text_file(csv_dir / "recall.csv").rfind("k,recall", 0) == 0);
  CHECK(read_text_file(csv_dir / "scatter.csv")
            .rfind("query,mcs,alignment_ratio,expected,predicted", 0) == 0);
}

TEST_CASE("usage errors exit 2 and --help exits 0") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("relocalise --help").exit_code == 0);
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("build-db --input /nonexistent_dir_xyz --db /tmp/x").exit_code ==
        2);
  CHECK(run_cli("frobnicate").exit_code == 2);
}
