// qce: plan, build, verify, sample, render and report constructions.
//
// Exit codes: 0 success (soft warnings allowed), 1 malformed flags or input
// files, 2 infeasible parameters, 3 any other construction failure or a
// failed hard check.

#include "qce/elevator.hpp"
#include "qce/errors.hpp"
#include "qce/io.hpp"
#include "qce/params.hpp"
#include "qce/verify.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

using namespace qce;

enum Exit { kOk = 0, kMalformed = 1, kInfeasible = 2, kFailure = 3 };

struct PlanFlags {
  bool direct = false;
  int n = 0;
  double p = 0.0;
  std::optional<double> alpha, beta;
  std::optional<double> d, t;
  std::optional<std::uint64_t> M, Mprime;
  std::string out;
};

int run_plan(const PlanFlags& f) {
  InstanceParams P;
  if (f.direct) {
    if (!f.d || !f.M || !f.Mprime || !f.t) {
      std::cerr << "plan --direct needs --d, --M, --Mprime and --t\n";
      return kMalformed;
    }
    P = check_direct_params(f.n, f.p, *f.d, *f.M, *f.Mprime, *f.t);
    P.alpha = f.alpha;
    P.beta = f.beta;
  } else {
    if (f.d || f.M || f.Mprime || f.t) {
      std::cerr << "--d, --M, --Mprime and --t belong to --direct mode\n";
      return kMalformed;
    }
    if (!f.alpha || !f.beta) {
      std::cerr << "plan needs --alpha and --beta (or --direct)\n";
      return kMalformed;
    }
    P = derive_paper_params({f.n, f.p, *f.alpha, *f.beta});
  }
  write_json_file(f.out, params_to_json(P));
  std::cout << "wrote " << f.out << " (" << to_string(P.mode) << " mode, d = " << P.d << ", M = " << P.M
            << ", t = " << P.t << ", M' = " << P.Mprime << ", q = " << P.q << ")\n";
  return kOk;
}

int run_build(const std::string& in, const std::string& out, bool no_genmap) {
  Construction c;
  c.instance = build_instance_systems(params_from_json(read_json_file(in)));
  const auto& P = c.instance.params;
  if (P.mode == ParamMode::paper) {
    c.genmap_status = "skipped (paper-mode magnitude)";
  } else if (no_genmap) {
    c.genmap_status = "skipped (--no-genmap)";
  } else if (c.instance.dim() != 2) {
    c.genmap_status = "skipped (planar instances only)";
  } else {
    c.genmap = plan_moves(c.instance);
    const auto rep = validate_generating_map(*c.genmap);
    if (const auto* bad = rep.first_failure()) {
      std::cerr << "generating map failed validation: " << bad->name << ": " << bad->detail << '\n';
      return kFailure;
    }
    c.genmap_status = "built";
  }
  write_construction(out, c);
  std::cout << "wrote " << out << " (generating map: " << c.genmap_status;
  if (c.genmap) std::cout << ", " << c.genmap->script.size() << " moves";
  std::cout << ")\n";
  return kOk;
}

int run_verify_cmd(const std::string& in, const std::string& out, const VerifyOptions& opts) {
  const Construction c = load_construction_or_instance(in);
  const auto rep = run_verify(c.instance, c.genmap ? &*c.genmap : nullptr, opts);
  const auto j = report_to_json(rep);
  write_json_file(out, j);
  std::cout << format_report(j);
  for (const auto& chk : rep.checks) {
    if (chk.hard && !chk.passed) std::cerr << "hard check failed: [" << chk.suite << "] " << chk.name << ": " << chk.detail << '\n';
  }
  return rep.hard_passed() ? kOk : kFailure;
}

int run_sample(const std::string& in, const std::string& out, const std::string& sigma, std::size_t depth) {
  const Construction c = load_construction_or_instance(in);
  const auto fiber = FiberSpec::parse(sigma);
  fiber.check(c.instance);
  const auto cloud = fiber_image_cloud(c.instance, fiber, depth);
  if (out.empty() || out == "-") {
    write_cloud_csv(std::cout, cloud);
  } else {
    std::ofstream os(out);
    if (!os) throw FormatError("cannot write " + out);
    write_cloud_csv(os, cloud);
  }
  return kOk;
}

int run_render(const std::string& in, const std::string& out, int depth, const std::string& sigma) {
  const Construction c = load_construction_or_instance(in);
  std::vector<Vec> points;
  // the overlay is skipped when even one level has more than 1e4 points
  if (c.instance.params.Mprime > 1 && c.instance.params.Mprime <= 10000) {
    const auto fiber = FiberSpec::parse(sigma);
    fiber.check(c.instance);
    // deepest level with at most 1e4 points
    const double m = static_cast<double>(c.instance.params.Mprime);
    std::size_t k = 1;
    for (double count = m * m; k < 12 && count <= 1e4; count *= m) ++k;
    points = fiber_image_cloud(c.instance, fiber, k);
  }
  const auto svg = render_svg(c.instance, depth, points);
  std::ofstream os(out);
  if (!os) throw FormatError("cannot write " + out);
  os << svg;
  return kOk;
}

int run_report(const std::string& in) {
  std::cout << format_report(read_json_file(in));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasiconformal elevator constructions"};
  app.require_subcommand(1);

  PlanFlags pf;
  auto* plan = app.add_subcommand("plan", "derive or check instance parameters");
  plan->add_flag("--direct", pf.direct, "take d, M, M', t directly");
  plan->add_option("--n", pf.n, "dimension")->required();
  plan->add_option("--p", pf.p, "Sobolev exponent")->required();
  plan->add_option("--alpha", pf.alpha);
  plan->add_option("--beta", pf.beta);
  plan->add_option("--d", pf.d);
  plan->add_option("--M", pf.M);
  plan->add_option("--Mprime", pf.Mprime);
  plan->add_option("--t", pf.t);
  plan->add_option("-o,--output", pf.out, "instance file")->required();

  std::string in, out;
  bool no_genmap = false;
  auto* build = app.add_subcommand("build", "build systems, certificates and the generating map");
  build->add_option("-i,--input", in, "instance file")->required()->check(CLI::ExistingFile);
  build->add_option("-o,--output", out, "construction file")->required();
  build->add_flag("--no-genmap", no_genmap);

  VerifyOptions vo;
  std::string report_out = "report.json";
  auto* verify = app.add_subcommand("verify", "run the invariant suites");
  verify->add_option("-i,--input", in, "construction or instance file")->required()->check(CLI::ExistingFile);
  verify->add_option("-o,--output", report_out, "report file");
  verify->add_option("--fiber", vo.fiber, "fiber line seed|period for the cloud checks");
  verify->add_option("--samples", vo.sobolev_samples, "shell energy samples");
  verify->add_option("--seed", vo.seed);

  std::string what, sigma = "1|1";
  std::size_t depth = 0;
  auto* sample = app.add_subcommand("sample", "write a fiber-image point cloud as CSV");
  sample->add_option("what", what)->required()->check(CLI::IsMember({"fiber"}));
  sample->add_option("--sigma", sigma, "base address seed|period")->required();
  sample->add_option("--depth", depth)->required();
  sample->add_option("-i,--input", in, "construction or instance file")->required()->check(CLI::ExistingFile);
  sample->add_option("-o,--output", out, "CSV file (default: stdout)");

  int render_depth = 0;
  auto* render = app.add_subcommand("render", "write an SVG figure");
  render->add_option("-i,--input", in, "construction or instance file")->required()->check(CLI::ExistingFile);
  render->add_option("--depth", render_depth)->required()->check(CLI::NonNegativeNumber);
  render->add_option("--sigma", sigma, "fiber line for the point overlay");
  render->add_option("-o,--output", out, "SVG file")->required();

  auto* report = app.add_subcommand("report", "pretty-print a stored report");
  report->add_option("-i,--input", in, "report file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kMalformed;
  }

  if (!in.empty() && !out.empty() && std::filesystem::path(in) == std::filesystem::path(out)) {
    std::cerr << "input and output paths must differ\n";
    return kMalformed;
  }

  try {
    if (*plan) return run_plan(pf);
    if (*build) return run_build(in, out, no_genmap);
    if (*verify) return run_verify_cmd(in, report_out, vo);
    if (*sample) return run_sample(in, out, sigma, depth);
    if (*render) return run_render(in, out, render_depth, sigma);
    if (*report) return run_report(in);
  } catch (const InfeasibleParams& e) {
    std::cerr << e.what() << '\n';
    return kInfeasible;
  } catch (const FormatError& e) {
    std::cerr << "malformed input: " << e.what() << '\n';
    return kMalformed;
  } catch (const BadAddress& e) {
    std::cerr << "bad address: " << e.what() << '\n';
    return kMalformed;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return kFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << '\n';
    return kMalformed;
  }
  return kMalformed;
}
