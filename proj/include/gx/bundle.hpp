#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gx/control.hpp"
#include "gx/errors.hpp"
#include "gx/grid.hpp"
#include "gx/gspec.hpp"
#include "gx/rng.hpp"
#include "gx/step_function.hpp"
#include "gx/types.hpp"

namespace gx {

// Simulated ensemble under one control.  Per path p:
//   W(p, 0) = B(p, 0) = qv(p, 0) = 0
//   B(p, i+1)  = B(p, i) + h(p, i) * dW_i      with dW_i = W(p, i+1) - W(p, i)
//   qv(p, i+1) = qv(p, i) + h(p, i)^2 * dt
// h(p, i) lies in [sigma_lo, sigma_hi]; h is the control on ]t_i, t_i+1],
// chosen from information at t_i.  Contents are fixed by (seed, control,
// grid, band) alone, independent of thread count or chunking.
struct PathBundle {
  TimeGrid grid;
  GSpec spec;
  std::uint64_t seed = 0;
  std::string control;
  Index first_path = 0;  // global index of row 0

  PathMat W;   // n_paths x (n_steps + 1)
  PathMat h;   // n_paths x n_steps
  PathMat B;   // n_paths x (n_steps + 1)
  PathMat qv;  // n_paths x (n_steps + 1)

  Index n_paths() const { return B.rows(); }
};

namespace detail {

inline void simulate_rows(PathBundle& out, const VolControl& control,
                          Index row_begin, Index row_end) {
  const TimeGrid& grid = out.grid;
  const GSpec& g = out.spec;
  const double dt = grid.dt;
  const double sdt = std::sqrt(dt);
  const double lo = g.sigma_lo(), hi = g.sigma_hi();
  const double band_tol = 1e-12 * hi;
  for (Index p = row_begin; p < row_end; ++p) {
    const auto gp = static_cast<std::uint64_t>(out.first_path + p);
    CounterRng noise(chain_seed(chain_seed(out.seed, gp), 0));
    CounterRng ctrl(chain_seed(chain_seed(out.seed, gp), 1));
    double w = 0.0, b = 0.0, q = 0.0;
    out.W(p, 0) = 0.0;
    out.B(p, 0) = 0.0;
    out.qv(p, 0) = 0.0;
    for (Index i = 0; i < grid.n_steps; ++i) {
      const double sigma = control.sigma(i, b, q, grid, g, ctrl);
      if (sigma < lo - band_tol || sigma > hi + band_tol) {
        std::ostringstream os;
        os << "control emitted sigma " << sigma << " outside band [" << lo
           << ", " << hi << "] at step " << i;
        throw GuardError(os.str());
      }
      const double dw = sdt * noise.next_normal();
      w += dw;
      b += sigma * dw;
      q += sigma * sigma * dt;
      out.W(p, i + 1) = w;
      out.h(p, i) = sigma;
      out.B(p, i + 1) = b;
      out.qv(p, i + 1) = q;
    }
  }
}

}  // namespace detail

// `seed` is normally chain_seed(master, control_index); `first_path`
// offsets the global path indices so chunked simulation reproduces one
// big run exactly.
inline PathBundle simulate_bundle(const VolControl& control,
                                  const TimeGrid& grid, Index n_paths,
                                  std::uint64_t seed, const GSpec& spec,
                                  int jobs = 1, Index first_path = 0) {
  if (n_paths < 1) throw ConfigError("simulate_bundle needs n_paths >= 1");
  control.validate(grid, spec);
  PathBundle out;
  out.grid = grid;
  out.spec = spec;
  out.seed = seed;
  out.control = control.descriptor();
  out.first_path = first_path;
  out.W.resize(n_paths, grid.n_steps + 1);
  out.h.resize(n_paths, grid.n_steps);
  out.B.resize(n_paths, grid.n_steps + 1);
  out.qv.resize(n_paths, grid.n_steps + 1);

  if (jobs <= 1 || n_paths < 2) {
    detail::simulate_rows(out, control, 0, n_paths);
    return out;
  }
  const int workers = static_cast<int>(
      std::min<Index>(jobs, n_paths));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const Index lobound = n_paths * w / workers;
    const Index upbound = n_paths * (w + 1) / workers;
    pool.emplace_back([&out, &control, &errors, w, lobound, upbound] {
      try {
        detail::simulate_rows(out, control, lobound, upbound);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// Columnar export.  Line 1 carries the metadata needed to rebuild the
// bundle exactly; h on the final node row repeats the last step.
inline std::string bundle_to_csv(const PathBundle& b) {
  std::ostringstream os;
  os << "# gx-bundle v1 T=" << format_double(b.grid.T)
     << " n_steps=" << b.grid.n_steps << " seed=" << b.seed
     << " first_path=" << b.first_path
     << " sigma_lo_sq=" << format_double(b.spec.sigma_lo_sq)
     << " sigma_hi_sq=" << format_double(b.spec.sigma_hi_sq)
     << " control=" << b.control << "\n";
  os << "path_id,t,W,h,B,qv\n";
  for (Index p = 0; p < b.n_paths(); ++p) {
    for (Index i = 0; i <= b.grid.n_steps; ++i) {
      const Index hi_col = i < b.grid.n_steps ? i : b.grid.n_steps - 1;
      os << b.first_path + p << "," << format_double(b.grid.t(i)) << ","
         << format_double(b.W(p, i)) << "," << format_double(b.h(p, hi_col))
         << "," << format_double(b.B(p, i)) << ","
         << format_double(b.qv(p, i)) << "\n";
    }
  }
  return os.str();
}

inline PathBundle bundle_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("# gx-bundle v1 ", 0) != 0) {
    throw ConfigError("bundle csv must start with '# gx-bundle v1'");
  }
  double T = 0.0, lo_sq = 0.0, hi_sq = 0.0;
  long long n_steps = 0, first_path = 0;
  unsigned long long seed = 0;
  std::string control;
  {
    std::istringstream meta(line.substr(15));
    std::string tok;
    while (meta >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      if (key == "T") T = std::stod(val);
      else if (key == "n_steps") n_steps = std::stoll(val);
      else if (key == "seed") seed = std::stoull(val);
      else if (key == "first_path") first_path = std::stoll(val);
      else if (key == "sigma_lo_sq") lo_sq = std::stod(val);
      else if (key == "sigma_hi_sq") hi_sq = std::stod(val);
      else if (key == "control") control = val;
    }
  }
  if (!std::getline(is, line) || line != "path_id,t,W,h,B,qv") {
    throw ConfigError("bundle csv missing column header");
  }
  std::vector<std::array<double, 4>> rows;  // W, h, B, qv
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::array<double, 4> r{};
    std::istringstream cells(line);
    std::string cell;
    int col = 0;
    while (std::getline(cells, cell, ',')) {
      if (col >= 2 && col <= 5) r[static_cast<std::size_t>(col - 2)] = std::stod(cell);
      ++col;
    }
    if (col != 6) throw ConfigError("bundle csv row with wrong column count");
    rows.push_back(r);
  }
  const Index nodes = static_cast<Index>(n_steps) + 1;
  if (n_steps < 1 || rows.size() % static_cast<std::size_t>(nodes) != 0) {
    throw ConfigError("bundle csv row count does not match n_steps");
  }
  const auto n_paths = static_cast<Index>(rows.size() / static_cast<std::size_t>(nodes));
  PathBundle b;
  b.grid = TimeGrid(T, static_cast<Index>(n_steps));
  b.spec = GSpec(lo_sq, hi_sq);
  b.seed = seed;
  b.control = control;
  b.first_path = first_path;
  b.W.resize(n_paths, nodes);
  b.h.resize(n_paths, n_steps);
  b.B.resize(n_paths, nodes);
  b.qv.resize(n_paths, nodes);
  for (Index p = 0; p < n_paths; ++p) {
    for (Index i = 0; i < nodes; ++i) {
      const auto& r = rows[static_cast<std::size_t>(p * nodes + i)];
      b.W(p, i) = r[0];
      if (i < n_steps) b.h(p, i) = r[1];
      b.B(p, i) = r[2];
      b.qv(p, i) = r[3];
    }
  }
  return b;
}

// Binary layout v1, little-endian:
//   magic "GXPB", u32 version, u64 seed, i64 first_path, i64 n_paths,
//   i64 n_steps, f64 T, f64 sigma_lo_sq, f64 sigma_hi_sq,
//   u32 control length, control bytes, then W, h, B, qv row-major.
inline void bundle_write_binary(const PathBundle& b,
                                const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  const auto put = [&out](const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  };
  out.write("GXPB", 4);
  const std::uint32_t version = 1;
  put(&version, 4);
  put(&b.seed, 8);
  const std::int64_t first = b.first_path, np = b.n_paths(), ns = b.grid.n_steps;
  put(&first, 8);
  put(&np, 8);
  put(&ns, 8);
  put(&b.grid.T, 8);
  put(&b.spec.sigma_lo_sq, 8);
  put(&b.spec.sigma_hi_sq, 8);
  const auto clen = static_cast<std::uint32_t>(b.control.size());
  put(&clen, 4);
  put(b.control.data(), b.control.size());
  put(b.W.data(), sizeof(double) * static_cast<std::size_t>(b.W.size()));
  put(b.h.data(), sizeof(double) * static_cast<std::size_t>(b.h.size()));
  put(b.B.data(), sizeof(double) * static_cast<std::size_t>(b.B.size()));
  put(b.qv.data(), sizeof(double) * static_cast<std::size_t>(b.qv.size()));
  if (!out) throw ConfigError("short write to " + path.string());
}

inline PathBundle bundle_read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  const auto get = [&in, &path](void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw ConfigError("truncated bundle file " + path.string());
  };
  char magic[4];
  get(magic, 4);
  if (std::memcmp(magic, "GXPB", 4) != 0) {
    throw ConfigError("not a bundle file: " + path.string());
  }
  std::uint32_t version = 0;
  get(&version, 4);
  if (version != 1) {
    throw ConfigError("unsupported bundle version " + std::to_string(version));
  }
  PathBundle b;
  std::int64_t first = 0, np = 0, ns = 0;
  double T = 0.0, lo_sq = 0.0, hi_sq = 0.0;
  get(&b.seed, 8);
  get(&first, 8);
  get(&np, 8);
  get(&ns, 8);
  get(&T, 8);
  get(&lo_sq, 8);
  get(&hi_sq, 8);
  std::uint32_t clen = 0;
  get(&clen, 4);
  b.control.resize(clen);
  if (clen > 0) get(b.control.data(), clen);
  if (np < 1 || ns < 1) throw ConfigError("bad bundle dimensions");
  b.first_path = first;
  b.grid = TimeGrid(T, static_cast<Index>(ns));
  b.spec = GSpec(lo_sq, hi_sq);
  b.W.resize(np, ns + 1);
  b.h.resize(np, ns);
  b.B.resize(np, ns + 1);
  b.qv.resize(np, ns + 1);
  get(b.W.data(), sizeof(double) * static_cast<std::size_t>(b.W.size()));
  get(b.h.data(), sizeof(double) * static_cast<std::size_t>(b.h.size()));
  get(b.B.data(), sizeof(double) * static_cast<std::size_t>(b.B.size()));
  get(b.qv.data(), sizeof(double) * static_cast<std::size_t>(b.qv.size()));
  return b;
}

}  // namespace gx
