#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "psipde/core.hpp"
#include "psipde/field_io.hpp"
#include "psipde/rng.hpp"

using namespace psipde;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("psipde_core_" + name);
}

FieldTensor ramp_field(const Grid& g) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.37 * double(i)) + 1e-3 * double(i);
  return FieldTensor(g, v);
}

}  // namespace

TEST(Grid, RejectsTooFewPoints) {
  EXPECT_THROW(Grid::make_1d({0, 1, 4}, {0, 1, 16}), Error);
  EXPECT_THROW(Grid::make_1d({0, 1, 16}, {1, 0, 16}), Error);
  EXPECT_NO_THROW(Grid::make_2d({0, 1, 8}, {0, 1, 8}, {0, 1, 8}));
}

TEST(FieldTensor, TimeMajorIndexing) {
  const Grid g = Grid::make_2d({0, 1, 8}, {0, 1, 9}, {0, 1, 10});
  const FieldTensor f = ramp_field(g);
  EXPECT_EQ(f.index(2, 3, 4), (2u * 9 + 3) * 10 + 4);
  EXPECT_EQ(f.slice(3).size(), 90u);
  EXPECT_EQ(f.slice(3)[0], f(3, 0, 0));
  EXPECT_THROW(FieldTensor(g, std::vector<double>(10)), Error);
}

TEST(FieldStats, ShiftMovesMeanKeepsStd) {
  const Grid g = Grid::make_1d({0, 1, 16}, {0, 1, 32});
  const FieldTensor f = ramp_field(g);
  std::vector<double> shifted(f.values().begin(), f.values().end());
  for (auto& v : shifted) v += 3.25;
  const auto a = field_stats(f), b = field_stats(shifted);
  EXPECT_NEAR(b.mean - a.mean, 3.25, 1e-12);
  EXPECT_NEAR(b.std, a.std, 1e-12);
}

TEST(FieldStats, PopulationStd) {
  const std::vector<double> v = {1, 2, 3, 4};
  EXPECT_NEAR(field_stats(v).std, std::sqrt(1.25), 1e-15);
}

TEST(TermSpec, LabelsRoundTrip) {
  for (const char* label : {"1", "u", "u^3", "u_x", "u*u_x", "u^2*u_xx", "u^3*u_xxx", "(u_x+u_y)", "u*(u_x+u_y)",
                            "(u_xx+u_yy)", "u^2*(u_xx+u_yy)", "u_y", "u*u_yy"}) {
    EXPECT_EQ(parse_term(label).label(), label);
  }
  EXPECT_THROW(parse_term("u**u_x"), Error);
  EXPECT_THROW(parse_term("v_x"), Error);
  EXPECT_THROW(parse_term("u^2*"), Error);
}

TEST(CandidateEquation, SortsAndValidates) {
  TermSpec a = parse_term("u_xx");
  a.index = 9;
  TermSpec b = parse_term("u*u_x");
  b.index = 6;
  const auto eq = make_equation({{a, 0.5}, {b, -1.0}}, EquationOrigin::selection);
  ASSERT_EQ(eq.terms.size(), 2u);
  EXPECT_EQ(eq.terms[0].term.index, 6);
  EXPECT_EQ(eq.support, (std::set<int>{6, 9}));
  EXPECT_THROW(make_equation({}, EquationOrigin::selection), Error);
  EXPECT_THROW(make_equation({{a, std::nan("")}}, EquationOrigin::selection), Error);
}

TEST(FieldIo, RoundTripIsBitExact) {
  const Grid g = Grid::make_2d({0, 2, 8}, {-1, 1 - 2.0 / 9, 9}, {-1, 0.5, 10});
  const FieldTensor f = ramp_field(g);
  const auto p = temp_path("rt.psig");
  write_field(f, p);
  const FieldTensor r = read_field(p);
  EXPECT_TRUE(r.grid() == g);
  ASSERT_EQ(r.size(), f.size());
  EXPECT_EQ(std::memcmp(r.values().data(), f.values().data(), f.size() * sizeof(double)), 0);
  std::filesystem::remove(p);
}

TEST(FieldIo, FileSizeMatchesFormat) {
  PsigArray a;
  a.dims = {2, 2, 2};
  a.ranges = {{0, 1}, {0, 1}, {0, 1}};
  a.values = {1, 2, 3, 4, 5, 6, 7, 8};
  const auto p = temp_path("size.psig");
  write_psig(p, a);
  // magic 4 + version 2 + ndim 1 + 3 dims * 8 + 3 ranges * 16
  EXPECT_EQ(psig_header_size(3), 4u + 2 + 1 + 24 + 48);
  EXPECT_EQ(std::filesystem::file_size(p), psig_header_size(3) + 8 * 8);
  std::filesystem::remove(p);
}

TEST(FieldIo, ErrorsHaveDistinctCodes) {
  const Grid g = Grid::make_1d({0, 1, 8}, {0, 1, 8});
  const auto p = temp_path("bad.psig");
  write_field(ramp_field(g), p);
  std::string bytes;
  {
    std::ifstream in(p, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto expect_code = [&](const std::string& content, ErrorCode code) {
    {
      std::ofstream out(p, std::ios::binary | std::ios::trunc);
      out << content;
    }
    try {
      read_field(p);
      FAIL() << "expected an error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code) << e.what();
    }
  };
  std::string wrong = bytes;
  wrong[0] = 'X';
  expect_code(wrong, ErrorCode::bad_magic);
  expect_code(bytes.substr(0, bytes.size() - 5), ErrorCode::truncated_payload);
  expect_code(bytes + std::string(8, '\0'), ErrorCode::dimension_mismatch);
  std::filesystem::remove(p);
}

TEST(FieldIo, CsvHasHeaderAndOneRowPerNode) {
  const Grid g = Grid::make_1d({0, 1, 8}, {0, 1, 10});
  const auto p = temp_path("f.csv");
  write_field_csv(ramp_field(g), p);
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x,u");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, g.size());
  std::filesystem::remove(p);
}

TEST(Rng, StreamsAreReproducibleAndIndependent) {
  CounterRng a(7, 1), b(7, 1), c(7, 2);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
  EXPECT_NE(derive_seed(1, "simulate.noise"), derive_seed(1, "select.splits"));
  EXPECT_EQ(derive_seed(5, "denoise.init"), derive_seed(5, "denoise.init"));
}

TEST(Rng, NormalMoments) {
  CounterRng r(123);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}
