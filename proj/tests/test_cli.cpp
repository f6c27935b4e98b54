#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cagg/config.hpp"
#include "cagg/run.hpp"
#include "cagg/timeseries.hpp"
#include "cagg/verify.hpp"

using namespace cagg;
namespace fs = std::filesystem;

namespace {

const std::string kSmallDisk = R"([run]
out_dir = "unused"
seed = 3

[grid]
lo = -2.0
hi = 2.0
h = 0.0625

[shape]
kind = "disk"
c = [0.0, 0.0]
r = 1.0

[solver]
t_end = 0.2
)";

int config_error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const config_error& e) {
    return e.line();
  }
  return -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  os << s;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("cagg_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int cagg(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + CAGG_CLI_PATH + " " + args + " >" + (dir_ / "stdout.txt").string() + " 2>" +
                            (dir_ / "stderr.txt").string();
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  }
  std::string out() const { return slurp(dir_ / "stdout.txt"); }
  std::string err() const { return slurp(dir_ / "stderr.txt"); }

  fs::path dir_;
};

}  // namespace

TEST(Config, ParsesAllShapes) {
  const auto c = parse_config(kSmallDisk);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.grid.nx, 64);
  EXPECT_EQ(c.shape_kind, "disk");
  EXPECT_DOUBLE_EQ(c.t_end, 0.2);
  auto with_shape = [](const std::string& shape) {
    return parse_config("[grid]\nlo = -2\nhi = 2\nh = 0.125\n[shape]\n" + shape);
  };
  EXPECT_NEAR(shape_area(with_shape("kind = ellipse\na = 2\nb = 0.5\n").shape), kPi, 1e-12);
  EXPECT_NEAR(shape_area(with_shape("kind = square\ns = 1.5\n").shape), 2.25, 1e-12);
  EXPECT_NEAR(shape_area(with_shape("kind = two_disks\nr1 = 0.5\nr2 = 0.5\n").shape), 0.5 * kPi, 1e-12);
  const auto m = parse_config("[solver]\nm_list = [4, 9.5]\n");
  EXPECT_EQ(m.m_list, (std::vector<double>{4.0, 9.5}));
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_EQ(config_error_line("[grid]\nlo = -2\nh = abc\n"), 3);
  EXPECT_EQ(config_error_line("# comment\n[solver]\n\nm = 0.5\n"), 4);
  EXPECT_EQ(config_error_line("[solver]\ntau = 0.1\nbogus = 1\n"), 3);
  EXPECT_EQ(config_error_line("[run]\nseed = 0\n[nonsense]\nx = 1\n"), 3);
  EXPECT_EQ(config_error_line("[shape]\nkind = hexagon\n"), 2);
  EXPECT_EQ(config_error_line("[grid]\nlo = 0\nhi = 1\nh = 0.3\n"), 4);
  EXPECT_EQ(config_error_line("[shape]\nkind = disk\nc = [1, 2, 3]\n"), 3);
  EXPECT_EQ(config_error_line("[run]\nseed = -1\n"), 2);
  EXPECT_EQ(config_error_line("[solver]\nm_list = [8, 1]\n"), 2);
  EXPECT_GT(config_error_line("[grid\nh = 0.1\n"), 0);
  EXPECT_THROW(load_config("/nonexistent/cfg.toml"), config_error);
}

TEST(Config, HashIsGitBlobId) {
  // values from `git hash-object`
  EXPECT_EQ(detail::git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(detail::git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  const auto a = parse_config(kSmallDisk);
  const auto b = parse_config(kSmallDisk + "# trailing comment\n");
  EXPECT_EQ(config_hash(a), detail::git_blob_sha1(kSmallDisk));
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(TimeSeries, RoundTripIsExact) {
  const auto p = fs::temp_directory_path() / "cagg_ts_roundtrip.csv";
  std::vector<TimeSeriesRow> rows;
  for (int k = 0; k < 5; ++k) {
    TimeSeriesRow r;
    r.t = 0.1 * k + 1e-17;
    r.mass = kPi / 3.0;
    r.m2 = std::exp(-0.37 * k);
    r.com_x = -1e-300;
    r.e_inf = k == 4 ? std::numeric_limits<double>::infinity() : -0.19635;
    rows.push_back(r);
  }
  {
    TimeSeriesWriter w(p.string());
    for (const auto& r : rows) w.write(r);
    EXPECT_THROW(w.write(rows.front()), std::logic_error);
  }
  const auto back = read_timeseries(p.string());
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto a = rows[k].values(), b = back[k].values();
    for (std::size_t c = 0; c < a.size(); ++c) {
      if (std::isnan(a[c])) EXPECT_TRUE(std::isnan(b[c]));
      else EXPECT_EQ(a[c], b[c]) << k << " " << c;
    }
  }
  spit(p, "t,mass\n0,1\n");
  EXPECT_THROW(read_timeseries(p.string()), config_error);
  fs::remove(p);
}

TEST(Schema, FixedContract) {
  EXPECT_EQ(timeseries_header(),
            "t,mass,m2,com_x,com_y,e_inf,e_m,asymmetry,f_value,support_radius,excess_mass,w2_to_prev");
  EXPECT_EQ(std::string(kFieldMagic), "CAGG-FIELD v1");
  const auto s = dump_schema();
  EXPECT_NE(s.find(timeseries_header()), std::string::npos);
  EXPECT_NE(s.find("CAGG-FIELD v1"), std::string::npos);
  EXPECT_EQ(s, dump_schema());
}

TEST(Verify, MassCheckDetectsJump) {
  std::vector<TimeSeriesRow> rows(4);
  for (int k = 0; k < 4; ++k) rows[k].t = k, rows[k].mass = 2.0;
  EXPECT_TRUE(check_mass(rows).pass);
  rows[2].mass = 2.0 * (1 + 1e-6);
  EXPECT_FALSE(check_mass(rows).pass);
  rows[2].t = 0.5;
  EXPECT_FALSE(check_time_increasing(rows).pass);
}

TEST_F(Cli, SchemaIsByteIdentical) {
  ASSERT_EQ(cagg("schema"), 0);
  const auto a = out();
  ASSERT_EQ(cagg("schema"), 0);
  EXPECT_EQ(out(), a);
  EXPECT_EQ(a, dump_schema());
}

TEST_F(Cli, HeleShawDiskRunVerifiesAndIsDeterministic) {
  spit(dir_ / "disk.toml", kSmallDisk);
  const auto run1 = dir_ / "run1", run2 = dir_ / "run2";
  ASSERT_EQ(cagg("heleshaw --quiet --config " + (dir_ / "disk.toml").string() + " --out " + run1.string()), 0) << err();
  ASSERT_EQ(cagg("heleshaw --quiet --config " + (dir_ / "disk.toml").string() + " --out " + run2.string()), 0) << err();
  EXPECT_EQ(slurp(run1 / "config.toml"), kSmallDisk);
  EXPECT_NE(slurp(run1 / "run.txt").find("config_sha1 = " + detail::git_blob_sha1(kSmallDisk)), std::string::npos);
  EXPECT_EQ(slurp(run1 / "timeseries.csv"), slurp(run2 / "timeseries.csv"));
  EXPECT_EQ(slurp(run1 / "fields" / "final.field"), slurp(run2 / "fields" / "final.field"));

  ASSERT_EQ(cagg("verify " + run1.string()), 0) << out();
  EXPECT_EQ(out().find("FAIL"), std::string::npos);
  EXPECT_NE(out().find("PASS disk boundary speed"), std::string::npos);

  // fault injection: a mass jump in one row
  auto rows = read_timeseries((run1 / "timeseries.csv").string());
  ASSERT_GT(rows.size(), 3u);
  rows[rows.size() / 2].mass *= 1.01;
  {
    TimeSeriesWriter w((run1 / "timeseries.csv").string());
    for (const auto& r : rows) w.write(r);
  }
  EXPECT_EQ(cagg("verify " + run1.string()), kExitVerify);
  EXPECT_NE(out().find("FAIL mass"), std::string::npos) << out();

  // a different config under the same run.txt fails the hash check
  spit(run2 / "config.toml", kSmallDisk + "\n");
  EXPECT_EQ(cagg("verify " + run2.string()), kExitVerify);
  EXPECT_NE(out().find("FAIL config hash"), std::string::npos);
}

TEST_F(Cli, JkoRunVerifies) {
  spit(dir_ / "jko.toml", R"([grid]
lo = -2.0
hi = 2.0
h = 0.0625
[shape]
kind = "ellipse"
a = 1.2
b = 0.8
[solver]
drift = "constrained"
tau = 0.05
t_end = 0.1
dump_every = 1
)");
  const auto run = dir_ / "run";
  ASSERT_EQ(cagg("jko --quiet --config " + (dir_ / "jko.toml").string() + " --out " + run.string()), 0) << err();
  EXPECT_TRUE(fs::exists(run / "jko.csv"));
  EXPECT_TRUE(fs::exists(run / "fields" / "rho_000002.field"));
  EXPECT_EQ(read_timeseries((run / "timeseries.csv").string()).size(), 3u);
  EXPECT_EQ(cagg("verify " + run.string()), 0) << out();
}

TEST_F(Cli, ConfigErrorsExitTwoWithoutArtifacts) {
  const auto run = dir_ / "run";
  spit(dir_ / "bad.toml", "[grid]\nh = -1\n");
  EXPECT_EQ(cagg("heleshaw --config " + (dir_ / "bad.toml").string() + " --out " + run.string()), kExitConfig);
  EXPECT_NE(err().find("line 2"), std::string::npos) << err();
  EXPECT_FALSE(fs::exists(run));

  spit(dir_ / "drift.toml", "[solver]\ndrift = zero\n");
  EXPECT_EQ(cagg("jko --config " + (dir_ / "drift.toml").string() + " --out " + run.string()), kExitConfig);
  EXPECT_FALSE(fs::exists(run));

  spit(dir_ / "ok.toml", kSmallDisk);
  EXPECT_EQ(cagg("heleshaw --config " + (dir_ / "ok.toml").string() + " --out " + run.string(), "CAGG_THREADS=abc"),
            kExitConfig);
  EXPECT_FALSE(fs::exists(run));
  EXPECT_EQ(cagg("msweep --config " + (dir_ / "ok.toml").string() + " --m 8,1 --out " + run.string()), kExitConfig);
  EXPECT_FALSE(fs::exists(run));
  EXPECT_EQ(cagg("heleshaw --config " + (dir_ / "missing.toml").string()), kExitConfig);
  EXPECT_EQ(cagg("frobnicate"), kExitConfig);
}

TEST_F(Cli, VerifyMissingArtifactsExitsThree) {
  EXPECT_EQ(cagg("verify " + (dir_ / "nothing").string()), kExitVerify);
  fs::create_directories(dir_ / "partial");
  spit(dir_ / "partial" / "run.txt", "study = heleshaw\n");
  EXPECT_EQ(cagg("verify " + (dir_ / "partial").string()), kExitVerify);
  EXPECT_NE(err().find("missing artifact"), std::string::npos);
}

TEST_F(Cli, ThreadCountIsRecorded) {
  spit(dir_ / "disk.toml", kSmallDisk);
  const auto run = dir_ / "run";
  ASSERT_EQ(cagg("diag --quiet --config " + (dir_ / "disk.toml").string() + " --out " + run.string(), "CAGG_THREADS=3"),
            0)
      << err();
  EXPECT_NE(slurp(run / "run.txt").find("threads = 3"), std::string::npos);
  EXPECT_TRUE(fs::exists(run / "diag.csv"));
  EXPECT_EQ(cagg("verify " + run.string()), 0) << out();
}
