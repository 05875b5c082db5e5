#include "opfcert/solver.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

namespace opfcert::solver {

namespace fs = std::filesystem;

namespace {

std::string read_tail(const fs::path& p, std::size_t max_bytes = 2000) {
  std::ifstream f(p, std::ios::binary);
  if (!f) return "";
  std::ostringstream all;
  all << f.rdbuf();
  std::string s = all.str();
  if (s.size() > max_bytes) s = "..." + s.substr(s.size() - max_bytes);
  return s;
}

class SubprocessBackend final : public ConicBackend {
 public:
  explicit SubprocessBackend(std::string command) : command_(std::move(command)) {}

  std::string name() const override { return "subprocess"; }
  bool thread_safe() const override { return true; }

  RawSolution solve_raw(const ConicProgram& p, const SolverConfig& cfg) override {
    if (command_.empty()) throw SolveError("subprocess backend needs a command");
    std::string tmpl = (fs::temp_directory_path() / "opfcert-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw SolveError("could not create a scratch directory");
    const fs::path dir = tmpl;
    struct Cleanup {
      fs::path d;
      ~Cleanup() {
        std::error_code ec;
        fs::remove_all(d, ec);
      }
    } cleanup{dir};

    const fs::path in = dir / "problem.cb";
    const fs::path out = dir / "solution.json";
    const fs::path log = dir / "solver.log";
    {
      std::ofstream f(in);
      relaxation::write_conic_benchmark(p, f);
      if (!f) throw SolveError("could not write " + in.string());
    }
    std::string cmd = command_ + " '" + in.string() + "' '" + out.string() + "' > '" +
                      log.string() + "' 2>&1";
    if (cfg.time_limit_s > 0.0)
      cmd = "OPFCERT_TIME_LIMIT=" + std::to_string(cfg.time_limit_s) + " " + cmd;
    const int rc = std::system(cmd.c_str());
    if (rc != 0)
      throw SolveError("solver command failed (exit " + std::to_string(rc) +
                       "): " + read_tail(log));

    std::ifstream f(out);
    if (!f) throw SolveError("solver command produced no solution file: " + read_tail(log));
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw SolveError(std::string("malformed solution file: ") + e.what());
    }

    RawSolution raw;
    const std::string status = j.value("status", "numerical_failure");
    if (status == "optimal")
      raw.status = SolveStatus::optimal;
    else if (status == "infeasible")
      raw.status = SolveStatus::infeasible;
    else if (status == "unbounded")
      raw.status = SolveStatus::unbounded;
    else
      raw.status = SolveStatus::numerical_failure;
    raw.message = j.value("message", "");
    raw.iterations = j.value("iterations", 0);
    raw.seconds = j.value("seconds", 0.0);
    if (raw.status == SolveStatus::infeasible || raw.status == SolveStatus::unbounded)
      return raw;
    raw.objective = j.value("objective", 0.0);
    raw.duality_gap = j.value("duality_gap", 0.0);
    if (j.contains("x")) {
      raw.x = j.at("x").get<std::vector<double>>();
      if (raw.x.size() != static_cast<std::size_t>(p.nvar()))
        throw SolveError("solution vector has wrong length (" +
                         std::to_string(raw.x.size()) + " of " +
                         std::to_string(p.nvar()) + ")");
    }
    return raw;
  }

 private:
  std::string command_;
};

}  // namespace

std::unique_ptr<ConicBackend> make_subprocess_backend(std::string command) {
  return std::make_unique<SubprocessBackend>(std::move(command));
}

}  // namespace opfcert::solver
