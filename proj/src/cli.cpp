#include "specdeform/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "specdeform/bundle.hpp"
#include "specdeform/descriptor.hpp"
#include "specdeform/error.hpp"
#include "specdeform/laplacian.hpp"
#include "specdeform/retrieval.hpp"
#include "specdeform/spectral.hpp"
#include "text_util.hpp"

namespace specdeform::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string out = ".";
  std::uint64_t seed = 7;
  bool verbose = false;
};

struct GenerateArgs {
  std::vector<int> per_mode{34, 33, 33};
  std::optional<double> noise;
  int axial_segments = BeamParams{}.axial_segments;
  int cross_segments = BeamParams{}.cross_segments;
};

struct DecomposeArgs {
  std::string bundle;
  std::optional<long> modes;
  std::string solver = "auto";
  std::string op = "cotangent";
  std::string normalization = "none";
  bool export_mtx = false;
};

struct EncodeArgs {
  std::string bundle;
  std::string basis;
  std::string op = "cotangent";
  std::string normalization = "none";
};

struct DescriptorArgs {
  std::string coeffs;
  std::string base_coeffs;
  std::optional<double> threshold;
  bool auto_threshold = false;
  std::optional<double> tune;
  std::string basis;
  std::string mesh;
  bool no_augment = false;
  std::string label;
};

struct ReconstructArgs {
  std::string mesh;
  std::string basis;
  std::string descriptor;
  std::string coeffs;
};

struct FilterArgs {
  std::string descriptor;
  std::string reference;
  std::string coeffs_dir;
  std::string bundle;
  std::optional<std::size_t> top_k;
  std::optional<double> min_score;
};

struct ClusterArgs {
  std::string coeffs_dir;
  std::string bundle;
  int k = 3;
  std::string feature = "first-eigenvector";
  int m = 500;
  bool scatter = false;
};

class Log {
 public:
  explicit Log(bool verbose) : verbose_(verbose) {}
  void info(const std::string& msg) const {
    if (verbose_) std::cerr << msg << '\n';
  }
  static void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

 private:
  bool verbose_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

fs::path prepare_out(const Globals& g) {
  const fs::path dir(g.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::Io, "cannot create output directory " + dir.string());
  // Probe writability up front so no stage fails halfway through.
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream p(probe);
    if (!p) throw Error(ErrorKind::Io, "output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
  return dir;
}

LaplacianOptions operator_options(const std::string& op, const std::string& normalization) {
  LaplacianOptions o;
  o.kind = laplacian_kind_from_string(op);
  if (normalization == "none")
    o.normalization = Normalization::None;
  else if (normalization == "mass")
    o.normalization = Normalization::Mass;
  else
    throw Error(ErrorKind::Usage, "unknown normalization '" + normalization + "'");
  return o;
}

// Coefficient files NNN.csv of a directory, keyed by shape id; base.csv is skipped.
std::vector<std::pair<std::size_t, fs::path>> coefficient_files(const fs::path& dir) {
  std::vector<std::pair<std::size_t, fs::path>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const std::string stem = entry.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; }))
      continue;
    out.emplace_back(std::stoul(stem), entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(ErrorKind::Usage, "no NNN.csv coefficient files in " + dir.string());
  return out;
}

std::vector<Candidate> load_candidates(const fs::path& dir, const std::string& bundle_dir) {
  std::vector<std::string> labels;
  if (!bundle_dir.empty()) {
    std::ifstream in(fs::path(bundle_dir) / "manifest.json", std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + (fs::path(bundle_dir) / "manifest.json").string());
    std::stringstream ss;
    ss << in.rdbuf();
    for (const auto& s : manifest_from_json(ss.str()).specs) labels.push_back(to_string(s.mode));
  }
  std::vector<Candidate> out;
  for (const auto& [id, path] : coefficient_files(dir)) {
    std::string label;
    if (!labels.empty()) {
      if (id >= labels.size()) throw Error(ErrorKind::Validation, path.string() + " has no manifest entry");
      label = labels[id];
    }
    out.push_back({id, label, read_coefficients(path)});
  }
  return out;
}

int cmd_generate(const Globals& g, const GenerateArgs& a, const Log& log) {
  if (a.per_mode.size() != 3) throw Error(ErrorKind::Usage, "--per-mode takes three counts");
  const fs::path dir = prepare_out(g);
  BeamParams params;
  params.axial_segments = a.axial_segments;
  params.cross_segments = a.cross_segments;
  BundleOptions options;
  options.noise_sigma = a.noise;
  const auto bundle = generate_bundle(params, {a.per_mode[0], a.per_mode[1], a.per_mode[2]}, g.seed, options);
  for (std::size_t i = 0; i < bundle.states.size(); ++i)
    for (const auto& w : sanity_warnings(bundle.base, bundle.manifest.specs[i]))
      Log::warn("state " + std::to_string(i) + ": " + w);
  save_bundle(bundle, dir);
  log.info("generated " + std::to_string(bundle.states.size()) + " states, N = " +
           std::to_string(bundle.base.num_vertices()));
  std::cout << dir.string() << '\n';
  return kOk;
}

int cmd_decompose(const Globals& g, const DecomposeArgs& a, const Log& log) {
  const TriangleMesh base = read_mesh_file(fs::path(a.bundle) / "base.off");
  const auto n = static_cast<Eigen::Index>(base.num_vertices());
  const Eigen::Index modes = a.modes ? static_cast<Eigen::Index>(*a.modes) : default_mode_count(n);
  if (modes < 1 || modes > n)
    throw Error(ErrorKind::Usage, "--modes " + std::to_string(modes) + " outside [1, " + std::to_string(n) + "]");
  const fs::path dir = prepare_out(g);

  const auto op = build_laplacian(base, operator_options(a.op, a.normalization));
  if (a.export_mtx) write_matrix_market(op, dir / "operator.mtx");
  DecomposeOptions options;
  options.solver = a.solver == "dense" ? SolverChoice::Dense
                   : a.solver == "lanczos" ? SolverChoice::Lanczos
                                           : SolverChoice::Auto;
  options.lanczos.seed = g.seed;
  log.info("decomposing N = " + std::to_string(n) + ", M = " + std::to_string(modes));
  const SpectralBasis basis = eigendecompose(op, modes, options);
  save_basis(basis, dir / "basis.spbs");
  std::size_t clustered = 0;
  for (bool c : basis.clustered()) clustered += c;
  if (clustered > 0)
    log.info(std::to_string(clustered) + " modes lie in near-degenerate eigenspaces");
  std::cout << "basis_fingerprint=" << fingerprint_hex(basis.fingerprint()) << " N=" << n << " M=" << modes
            << " lambda_1=" << detail::format_double(basis.eigenvalues()[0])
            << " lambda_M=" << detail::format_double(basis.eigenvalues()[modes - 1]) << '\n';
  return kOk;
}

int cmd_encode(const Globals& g, const EncodeArgs& a, const Log& log) {
  const SpectralBasis basis = load_basis(a.basis);
  const SimulationBundle bundle = load_bundle(a.bundle);
  const auto op = build_laplacian(bundle.base, operator_options(a.op, a.normalization));
  if (op.fingerprint() != basis.fingerprint())
    throw Error(ErrorKind::FingerprintMismatch, "basis " + fingerprint_hex(basis.fingerprint()) +
                                                    " was not computed from this bundle's base mesh (operator " +
                                                    fingerprint_hex(op.fingerprint()) + ")");
  const fs::path dir = prepare_out(g) / "coeffs";
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string());

  write_coefficients(encode_geometry(basis, DeformedState::from_mesh(bundle.base)), dir / "base.csv");
  for (std::size_t i = 0; i < bundle.states.size(); ++i) {
    const std::string name = fs::path(state_file_name(i, bundle.states.size())).stem().string() + ".csv";
    write_coefficients(encode_geometry(basis, bundle.states[i]), dir / name);
  }
  log.info("encoded " + std::to_string(bundle.states.size()) + " states with M = " +
           std::to_string(basis.num_modes()));
  std::cout << dir.string() << '\n';
  return kOk;
}

int cmd_descriptor(const Globals& g, const DescriptorArgs& a, const Log& log) {
  const SpectralCoefficients coeffs = read_coefficients(a.coeffs);
  std::optional<SpectralCoefficients> base;
  if (!a.base_coeffs.empty()) base = read_coefficients(a.base_coeffs);
  const bool augment = !a.no_augment;
  const std::string label = a.label.empty() ? fs::path(a.coeffs).stem().string() : a.label;
  const fs::path dir = prepare_out(g);

  std::optional<DeformationDescriptor> descriptor;
  if (a.tune) {
    if (base) throw Error(ErrorKind::Usage, "--tune does not combine with --base-coeffs");
    const SpectralBasis basis = load_basis(a.basis);
    const TriangleMesh mesh = read_mesh_file(a.mesh);
    TuneOptions options;
    options.target_rms = *a.tune;
    options.augment = augment;
    options.label = label;
    const TuneResult r = tune_threshold(coeffs, basis, DeformedState::from_mesh(mesh), options);
    log.info("tuned t = " + detail::format_double(r.threshold) + " after " + std::to_string(r.iterations) +
             " bisection steps, truncation RMS " + detail::format_double(r.achieved_rms));
    descriptor = r.descriptor;
  } else {
    const SelectionMode mode = base ? SelectionMode::BaselineDifference : SelectionMode::Magnitude;
    const SpectralCoefficients selecting = base ? coefficient_difference(coeffs, *base) : coeffs;
    const double t = a.threshold ? *a.threshold : statistical_threshold(selecting);
    const IndexSet selected = select_by_threshold(selecting, t);
    descriptor = complete_descriptor(selected, coeffs, augment, {t, mode, label});
  }
  const auto n = static_cast<std::size_t>(descriptor->entries().size());
  // Without a mesh the mode count stands in for N.
  const auto vertices = a.mesh.empty() ? static_cast<Eigen::Index>(coeffs.num_modes())
                                       : static_cast<Eigen::Index>(read_mesh_file(a.mesh).num_vertices());
  if (descriptor->oversized(vertices))
    Log::warn("descriptor keeps " + std::to_string(n) + " modes, more than 10% of " + std::to_string(vertices) +
              "; it is not compact");
  const fs::path path = dir / ("descriptor_" + label + ".json");
  write_descriptor(*descriptor, path);
  std::cout << path.string() << " size=" << n << " t=" << detail::format_double(descriptor->threshold()) << '\n';
  return kOk;
}

int cmd_reconstruct(const Globals& g, const ReconstructArgs& a, const Log& log) {
  const TriangleMesh mesh = read_mesh_file(a.mesh);
  const SpectralBasis basis = load_basis(a.basis);
  const DeformationDescriptor descriptor = read_descriptor(a.descriptor);
  const SpectralCoefficients coeffs = read_coefficients(a.coeffs);
  if (descriptor.basis_fingerprint() != basis.fingerprint())
    throw Error(ErrorKind::FingerprintMismatch, "descriptor was built against a different basis");
  const fs::path dir = prepare_out(g);

  const IndexSet subset = descriptor.indices();
  if (subset.empty()) Log::warn("descriptor is empty; the reconstruction is the zero geometry");
  const auto m = static_cast<int>(subset.size());
  const DeformedState reference = DeformedState::from_mesh(mesh);

  const Reconstruction by_descriptor = reconstruct_geometry(basis, coeffs, subset);
  const Reconstruction by_order = reconstruct_geometry(basis, coeffs, first_modes(m));
  write_mesh_file(TriangleMesh(by_descriptor.coordinates, mesh.triangles()), dir / "reconstruction_descriptor.off");
  write_mesh_file(TriangleMesh(by_order.coordinates, mesh.triangles()), dir / "reconstruction_first_m.off");

  const double e_desc = reconstruction_error(basis, coeffs, subset, reference);
  const double e_order = reconstruction_error(basis, coeffs, first_modes(m), reference);
  const double e_full = reconstruction_error(basis, coeffs, first_modes(static_cast<int>(basis.num_modes())), reference);
  std::string csv = "method,modes,rms\n";
  csv += "descriptor," + std::to_string(m) + ',' + detail::format_double(e_desc) + '\n';
  csv += "first_m," + std::to_string(m) + ',' + detail::format_double(e_order) + '\n';
  csv += "all_modes," + std::to_string(basis.num_modes()) + ',' + detail::format_double(e_full) + '\n';
  write_text(dir / "reconstruction_errors.csv", csv);
  log.info("descriptor RMS " + detail::format_double(e_desc) + ", first-" + std::to_string(m) + " RMS " +
           detail::format_double(e_order));
  std::cout << csv;
  return kOk;
}

int cmd_filter(const Globals& g, const FilterArgs& a, const Log& log) {
  if (a.descriptor.empty() == a.reference.empty())
    throw Error(ErrorKind::Usage, "filter needs exactly one of --descriptor and --full-vector");
  const auto bundle = load_candidates(a.coeffs_dir, a.bundle);
  const fs::path dir = prepare_out(g);
  const SimilarityRanking ranking =
      a.descriptor.empty()
          ? rank_bundle_full(read_coefficients(a.reference), fs::path(a.reference).stem().string(), bundle)
          : rank_bundle(read_descriptor(a.descriptor), bundle);
  write_text(dir / ("ranking_" + ranking.descriptor_label + ".csv"), ranking_to_csv(ranking));

  std::size_t degenerate = 0;
  for (const auto& e : ranking.entries) degenerate += e.degenerate;
  if (degenerate > 0) Log::warn(std::to_string(degenerate) + " shapes have zero-norm coefficients and score 0");

  const FilterMode mode = a.min_score ? FilterMode::at_least(*a.min_score) : FilterMode::top_k(a.top_k.value_or(9));
  const FilterResult result = filter_ranking(ranking, mode);
  if (result.clamped) Log::warn("top-k exceeds the bundle size; returning all shapes");
  log.info(std::to_string(result.ids.size()) + " shapes pass the filter");
  for (std::size_t id : result.ids) std::cout << id << '\n';
  return kOk;
}

int cmd_cluster(const Globals& g, const ClusterArgs& a, const Log& log) {
  if (a.k < 2) throw Error(ErrorKind::Usage, "--k must be at least 2");
  ClusterFeature feature;
  if (a.feature == "first-eigenvector")
    feature = ClusterFeature::first_eigenvector();
  else if (a.feature == "first-m")
    feature = ClusterFeature::first_m(a.m);
  else
    throw Error(ErrorKind::Usage, "unknown feature '" + a.feature + "'");
  const auto bundle = load_candidates(a.coeffs_dir, a.bundle);
  const fs::path dir = prepare_out(g);
  const ClusterAssignment assignment = cluster_coefficients(bundle, a.k, feature, g.seed);
  write_text(dir / "clusters.csv", clusters_to_csv(assignment));
  if (a.scatter) write_text(dir / "scatter.dat", scatter_data(bundle, &assignment));
  log.info("k-means converged after " + std::to_string(assignment.iterations) + " iterations, inertia " +
           detail::format_double(assignment.inertia));
  if (!a.bundle.empty()) {
    std::vector<std::string> labels;
    for (const auto& c : bundle) labels.push_back(c.label);
    std::cout << "purity=" << detail::format_double(cluster_purity(assignment.clusters, labels)) << '\n';
  }
  return kOk;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Numerical: return kNumerical;
    case ErrorKind::EmptySelection: return kEmpty;
    default: return kUsage;
  }
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Spectral deformation descriptors for simulation bundles", "specdeform"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.set_config("--config", "", "TOML/INI file with default flag values");

  Globals g;
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "Seed for generation, eigensolver start and clustering")->capture_default_str();
  app.add_flag("-v,--verbose", g.verbose, "Progress messages on stderr");

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate a labeled hat-beam bundle");
  generate->add_option("--per-mode", gen.per_mode, "Upward, downward and crush counts")
      ->expected(3)
      ->capture_default_str();
  generate->add_option("--noise", gen.noise, "Vertex noise sigma (default 0.5% of the bounding-box diagonal)")
      ->check(CLI::NonNegativeNumber);
  generate->add_option("--axial-segments", gen.axial_segments, "Axial segments")->capture_default_str();
  generate->add_option("--cross-segments", gen.cross_segments, "Segments across the hat top")->capture_default_str();

  DecomposeArgs dec;
  auto* decompose = app.add_subcommand("decompose", "Eigendecompose the base mesh operator");
  decompose->add_option("--bundle", dec.bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  decompose->add_option("--modes", dec.modes, "Number of modes M (default min(500, N-1))");
  decompose->add_option("--solver", dec.solver)->check(CLI::IsMember({"auto", "lanczos", "dense"}))->capture_default_str();
  decompose->add_option("--operator", dec.op)->check(CLI::IsMember({"cotangent", "uniform"}))->capture_default_str();
  decompose->add_option("--normalize", dec.normalization)->check(CLI::IsMember({"none", "mass"}))->capture_default_str();
  decompose->add_flag("--export-mtx", dec.export_mtx, "Also write the operator as Matrix Market");

  EncodeArgs enc;
  auto* encode_cmd = app.add_subcommand("encode", "Spectral coefficients of the base and every state");
  encode_cmd->add_option("--bundle", enc.bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  encode_cmd->add_option("--basis", enc.basis, "Basis file")->required()->check(CLI::ExistingFile);
  encode_cmd->add_option("--operator", enc.op)->check(CLI::IsMember({"cotangent", "uniform"}))->capture_default_str();
  encode_cmd->add_option("--normalize", enc.normalization)->check(CLI::IsMember({"none", "mass"}))->capture_default_str();

  DescriptorArgs des;
  auto* descriptor_cmd = app.add_subcommand("descriptor", "Build a deformation descriptor from coefficients");
  descriptor_cmd->add_option("--coeffs", des.coeffs, "Coefficient CSV of the exemplar")
      ->required()
      ->check(CLI::ExistingFile);
  auto* base_opt = descriptor_cmd->add_option("--base-coeffs", des.base_coeffs, "Select on differences to this CSV")
                       ->check(CLI::ExistingFile);
  auto* t_opt = descriptor_cmd->add_option("--threshold", des.threshold, "Fixed threshold t")
                    ->check(CLI::NonNegativeNumber);
  auto* auto_opt =
      descriptor_cmd->add_flag("--auto-threshold", des.auto_threshold, "Statistical threshold (mean + std), default");
  auto* tune_opt = descriptor_cmd->add_option("--tune", des.tune, "Largest t whose truncation RMS stays below this");
  auto* basis_opt = descriptor_cmd->add_option("--basis", des.basis, "Basis file (with --tune)")->check(CLI::ExistingFile);
  auto* mesh_opt = descriptor_cmd->add_option("--mesh", des.mesh, "Exemplar mesh (required by --tune)")
                       ->check(CLI::ExistingFile);
  descriptor_cmd->add_flag("--no-augment", des.no_augment, "Do not force modes 1 and 2 into the descriptor");
  descriptor_cmd->add_option("--label", des.label, "Descriptor label (default: coefficient file stem)");
  t_opt->excludes(auto_opt)->excludes(tune_opt);
  auto_opt->excludes(tune_opt);
  tune_opt->needs(basis_opt)->needs(mesh_opt);
  tune_opt->excludes(base_opt);

  ReconstructArgs rec;
  auto* reconstruct = app.add_subcommand("reconstruct", "Descriptor and first-M reconstructions with RMS errors");
  reconstruct->add_option("--mesh", rec.mesh, "Reference mesh (connectivity and error reference)")
      ->required()
      ->check(CLI::ExistingFile);
  reconstruct->add_option("--basis", rec.basis)->required()->check(CLI::ExistingFile);
  reconstruct->add_option("--descriptor", rec.descriptor)->required()->check(CLI::ExistingFile);
  reconstruct->add_option("--coeffs", rec.coeffs)->required()->check(CLI::ExistingFile);

  FilterArgs fil;
  auto* filter = app.add_subcommand("filter", "Rank a bundle by descriptor similarity");
  auto* d_opt = filter->add_option("--descriptor", fil.descriptor, "Descriptor JSON")->check(CLI::ExistingFile);
  filter->add_option("--full-vector", fil.reference, "Rank by all shared modes against this coefficient CSV instead")
      ->check(CLI::ExistingFile)
      ->excludes(d_opt);
  filter->add_option("--coeffs-dir", fil.coeffs_dir, "Directory of NNN.csv files")
      ->required()
      ->check(CLI::ExistingDirectory);
  filter->add_option("--bundle", fil.bundle, "Bundle directory for labels")->check(CLI::ExistingDirectory);
  auto* k_opt = filter->add_option("--top-k", fil.top_k, "Keep the k best shapes (default 9)");
  auto* s_opt = filter->add_option("--min-score", fil.min_score, "Keep shapes scoring at least this");
  k_opt->excludes(s_opt);

  ClusterArgs clu;
  auto* cluster = app.add_subcommand("cluster", "k-means over spectral coefficients");
  cluster->add_option("--coeffs-dir", clu.coeffs_dir)->required()->check(CLI::ExistingDirectory);
  cluster->add_option("--bundle", clu.bundle, "Bundle directory for labels and purity")->check(CLI::ExistingDirectory);
  cluster->add_option("--k", clu.k)->capture_default_str();
  cluster->add_option("--feature", clu.feature)
      ->check(CLI::IsMember({"first-eigenvector", "first-m"}))
      ->capture_default_str();
  cluster->add_option("--m", clu.m, "Modes for --feature first-m")->capture_default_str();
  cluster->add_flag("--scatter", clu.scatter, "Write gnuplot scatter data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const Log log(g.verbose);
  try {
    if (generate->parsed()) return cmd_generate(g, gen, log);
    if (decompose->parsed()) return cmd_decompose(g, dec, log);
    if (encode_cmd->parsed()) return cmd_encode(g, enc, log);
    if (descriptor_cmd->parsed()) return cmd_descriptor(g, des, log);
    if (reconstruct->parsed()) return cmd_reconstruct(g, rec, log);
    if (filter->parsed()) return cmd_filter(g, fil, log);
    if (cluster->parsed()) return cmd_cluster(g, clu, log);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace specdeform::cli
