#include "pushrel/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pushrel/error.hpp"

namespace pushrel {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace {

using nlohmann::json;

constexpr char kDatasetMagic[8] = {'P', 'R', 'D', 'A', 'T', 'A', '0', '1'};
constexpr char kCheckpointMagic[8] = {'P', 'R', 'C', 'K', 'P', 'T', '0', '1'};

struct NamedArray {
  std::string name;
  Tensor2 tensor;
};

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    require(out_.good(), "cannot open " + path + " for writing");
  }

  void magic(const char m[8]) { out_.write(m, 8); }
  void u32(std::uint32_t v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void u64(std::uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void bytes(const std::string& s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }

  void array(const NamedArray& a) {
    u32(static_cast<std::uint32_t>(a.name.size()));
    bytes(a.name);
    u64(static_cast<std::uint64_t>(a.tensor.rows));
    u64(static_cast<std::uint64_t>(a.tensor.cols));
    out_.write(reinterpret_cast<const char*>(a.tensor.data.data()),
               static_cast<std::streamsize>(a.tensor.data.size() * sizeof(double)));
  }

  void finish() {
    out_.flush();
    require(out_.good(), "write failed for " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    require(in_.good(), "cannot open " + path);
  }

  void expect_magic(const char m[8], const std::string& kind) {
    char buf[8];
    read_raw(buf, 8);
    if (std::memcmp(buf, m, 8) != 0)
      fail(path_ + " is not a " + kind + " file (bad magic)");
  }

  std::uint32_t u32() {
    std::uint32_t v;
    read_raw(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    read_raw(&v, sizeof v);
    return v;
  }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    read_raw(s.data(), n);
    return s;
  }

  NamedArray array() {
    NamedArray a;
    const std::uint32_t name_len = u32();
    a.name = bytes(name_len);
    const std::uint64_t rows = u64();
    const std::uint64_t cols = u64();
    require(rows < (1u << 28) && cols < (1u << 28), path_ + ": implausible array shape");
    a.tensor = Tensor2(static_cast<int>(rows), static_cast<int>(cols));
    read_raw(a.tensor.data.data(), a.tensor.data.size() * sizeof(double));
    return a;
  }

 private:
  void read_raw(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    require(in_.gcount() == static_cast<std::streamsize>(n), path_ + ": truncated file");
  }

  std::string path_;
  std::ifstream in_;
};

void check_versions(Reader& r, const std::string& path) {
  const std::uint32_t format = r.u32();
  if (format != kFormatVersion)
    fail(path + ": format version " + std::to_string(format) + " not supported (expected " +
         std::to_string(kFormatVersion) + ")");
  const std::uint32_t layout = r.u32();
  if (layout != kFeatureLayoutVersion)
    fail(path + ": feature layout version " + std::to_string(layout) +
         " does not match this build (expected " + std::to_string(kFeatureLayoutVersion) + ")");
}

json gen_to_json(const SceneGenConfig& g) {
  return json{{"n_objects", g.n_objects},
              {"radius_min", g.radius_min},
              {"radius_max", g.radius_max},
              {"layout", g.layout == SceneLayout::Sparse ? "sparse" : "dense"},
              {"environment_mode",
               g.environment_mode == EnvironmentMode::FixedOnly ? "fixed" : "mixed"},
              {"joint_probability", g.joint_probability},
              {"workspace_half_x", g.workspace_half_x},
              {"workspace_half_y", g.workspace_half_y},
              {"pusher_radius", g.pusher_radius}};
}

SceneGenConfig gen_from_json(const json& j) {
  SceneGenConfig g;
  g.n_objects = j.at("n_objects").get<int>();
  g.radius_min = j.at("radius_min").get<double>();
  g.radius_max = j.at("radius_max").get<double>();
  g.layout = j.at("layout").get<std::string>() == "sparse" ? SceneLayout::Sparse
                                                           : SceneLayout::Dense;
  g.environment_mode = j.at("environment_mode").get<std::string>() == "fixed"
                           ? EnvironmentMode::FixedOnly
                           : EnvironmentMode::Mixed;
  g.joint_probability = j.at("joint_probability").get<double>();
  g.workspace_half_x = j.at("workspace_half_x").get<double>();
  g.workspace_half_y = j.at("workspace_half_y").get<double>();
  g.pusher_radius = j.at("pusher_radius").get<double>();
  return g;
}

json sim_to_json(const SimConfig& s) {
  return json{{"dt", s.dt},
              {"solver_iterations", s.solver_iterations},
              {"baumgarte_beta", s.baumgarte_beta},
              {"table_friction_decel", s.table_friction_decel},
              {"angular_friction_decel", s.angular_friction_decel},
              {"restitution", s.restitution},
              {"contact_slop", s.contact_slop},
              {"max_speed", s.max_speed}};
}

SimConfig sim_from_json(const json& j) {
  SimConfig s;
  s.dt = j.at("dt").get<double>();
  s.solver_iterations = j.at("solver_iterations").get<int>();
  s.baumgarte_beta = j.at("baumgarte_beta").get<double>();
  s.table_friction_decel = j.at("table_friction_decel").get<double>();
  s.angular_friction_decel = j.at("angular_friction_decel").get<double>();
  s.restitution = j.at("restitution").get<double>();
  s.contact_slop = j.at("contact_slop").get<double>();
  s.max_speed = j.at("max_speed").get<double>();
  return s;
}

json push_to_json(const PushConfig& p) {
  return json{{"speed", p.speed}, {"length", p.length}, {"n_candidates", p.n_candidates}};
}

PushConfig push_from_json(const json& j) {
  PushConfig p;
  p.speed = j.at("speed").get<double>();
  p.length = j.at("length").get<double>();
  p.n_candidates = j.at("n_candidates").get<int>();
  return p;
}

json sizes_to_json(const StackSizes& s) {
  return json{{"code_dim", s.code_dim},
              {"object_encoder_hidden", s.object_encoder_hidden},
              {"relation_encoder_hidden", s.relation_encoder_hidden},
              {"relation_propagator_hidden", s.relation_propagator_hidden},
              {"object_propagator_hidden", s.object_propagator_hidden},
              {"prop_steps", s.prop_steps}};
}

StackSizes sizes_from_json(const json& j) {
  StackSizes s;
  s.code_dim = j.at("code_dim").get<int>();
  s.object_encoder_hidden = j.at("object_encoder_hidden").get<std::vector<int>>();
  s.relation_encoder_hidden = j.at("relation_encoder_hidden").get<std::vector<int>>();
  s.relation_propagator_hidden = j.at("relation_propagator_hidden").get<std::vector<int>>();
  s.object_propagator_hidden = j.at("object_propagator_hidden").get<std::vector<int>>();
  s.prop_steps = j.at("prop_steps").get<int>();
  return s;
}

constexpr int kObjectCols = 8;  // px py vx vy theta omega radius controlled
constexpr int kJointCols = 14;

void write_params(Writer& w, std::vector<ParamRef>& params) {
  w.u64(params.size());
  for (const auto& p : params) w.array({p.name, *p.value});
}

void read_params_into(Reader& r, std::vector<ParamRef>& params, const std::string& path) {
  const std::uint64_t count = r.u64();
  std::map<std::string, Tensor2> loaded;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray a = r.array();
    loaded.emplace(a.name, std::move(a.tensor));
  }
  for (auto& p : params) {
    auto it = loaded.find(p.name);
    require(it != loaded.end(), path + ": missing parameter " + p.name);
    require(it->second.same_shape(*p.value),
            path + ": shape mismatch for parameter " + p.name);
    *p.value = std::move(it->second);
  }
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  json meta;
  meta["kind"] = "dataset";
  meta["split"] = ds.split;
  meta["seed"] = ds.seed;
  meta["n_trajectories"] = ds.trajectories.size();
  meta["gen"] = gen_to_json(ds.gen);
  meta["sim"] = sim_to_json(ds.sim);
  meta["push"] = push_to_json(ds.push);

  Writer w(path);
  w.magic(kDatasetMagic);
  w.u32(kFormatVersion);
  w.u32(kFeatureLayoutVersion);
  const std::string meta_str = meta.dump();
  w.u64(meta_str.size());
  w.bytes(meta_str);

  std::vector<NamedArray> arrays;
  for (std::size_t ti = 0; ti < ds.trajectories.size(); ++ti) {
    const Trajectory& traj = ds.trajectories[ti];
    const int n = traj.states[0].object_count();
    const std::string prefix = "traj" + std::to_string(ti);

    NamedArray states{prefix + "/states",
                      Tensor2(static_cast<int>(traj.states.size()), n * kObjectCols)};
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
      require(traj.states[t].time == static_cast<int>(t), "dataset states must start at time 0");
      double* row = states.tensor.row(static_cast<int>(t));
      for (int i = 0; i < n; ++i) {
        const ObjectState& o = traj.states[t].objects[i];
        double* cell = row + i * kObjectCols;
        cell[0] = o.position.x;
        cell[1] = o.position.y;
        cell[2] = o.velocity.x;
        cell[3] = o.velocity.y;
        cell[4] = o.orientation;
        cell[5] = o.angular_velocity;
        cell[6] = o.radius;
        cell[7] = o.controlled ? 1.0 : 0.0;
      }
    }
    arrays.push_back(std::move(states));

    NamedArray controls{prefix + "/controls", Tensor2(traj.step_count(), 2)};
    for (int t = 0; t < traj.step_count(); ++t) {
      controls.tensor(t, 0) = traj.controls[t].x;
      controls.tensor(t, 1) = traj.controls[t].y;
    }
    arrays.push_back(std::move(controls));

    const auto& joints = traj.states[0].joints;
    NamedArray jarr{prefix + "/joints", Tensor2(static_cast<int>(joints.size()), kJointCols)};
    for (std::size_t k = 0; k < joints.size(); ++k) {
      const JointSpec& j = joints[k];
      double* row = jarr.tensor.row(static_cast<int>(k));
      row[0] = j.a;
      row[1] = j.b;
      row[2] = static_cast<double>(static_cast<int>(j.kind));
      row[3] = j.anchor.x;
      row[4] = j.anchor.y;
      row[5] = j.axis.x;
      row[6] = j.axis.y;
      row[7] = j.local_a.x;
      row[8] = j.local_a.y;
      row[9] = j.local_b.x;
      row[10] = j.local_b.y;
      row[11] = j.local_axis.x;
      row[12] = j.local_axis.y;
      row[13] = j.rest_angle;
    }
    arrays.push_back(std::move(jarr));
  }

  w.u64(arrays.size());
  for (const auto& a : arrays) w.array(a);
  w.finish();
}

Dataset load_dataset(const std::string& path) {
  Reader r(path);
  r.expect_magic(kDatasetMagic, "dataset");
  check_versions(r, path);
  const std::uint64_t meta_len = r.u64();
  const json meta = json::parse(r.bytes(meta_len));
  require(meta.at("kind") == "dataset", path + ": not a dataset");

  Dataset ds;
  ds.split = meta.at("split").get<std::string>();
  ds.seed = meta.at("seed").get<std::uint64_t>();
  ds.gen = gen_from_json(meta.at("gen"));
  ds.sim = sim_from_json(meta.at("sim"));
  ds.push = push_from_json(meta.at("push"));
  const std::size_t n_traj = meta.at("n_trajectories").get<std::size_t>();

  std::map<std::string, Tensor2> arrays;
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray a = r.array();
    arrays.emplace(a.name, std::move(a.tensor));
  }
  auto get = [&](const std::string& name) -> Tensor2& {
    auto it = arrays.find(name);
    require(it != arrays.end(), path + ": missing array " + name);
    return it->second;
  };

  for (std::size_t ti = 0; ti < n_traj; ++ti) {
    const std::string prefix = "traj" + std::to_string(ti);
    Tensor2& states = get(prefix + "/states");
    Tensor2& controls = get(prefix + "/controls");
    Tensor2& jarr = get(prefix + "/joints");
    require(states.cols % kObjectCols == 0, path + ": bad state width");
    const int n = states.cols / kObjectCols;

    Trajectory traj;
    traj.dt = ds.sim.dt;
    traj.environment_mode = ds.gen.environment_mode;

    std::vector<JointSpec> joints(static_cast<std::size_t>(jarr.rows));
    for (int k = 0; k < jarr.rows; ++k) {
      const double* row = jarr.row(k);
      JointSpec& j = joints[k];
      j.a = static_cast<int>(row[0]);
      j.b = static_cast<int>(row[1]);
      j.kind = static_cast<JointType>(static_cast<int>(row[2]));
      j.anchor = {row[3], row[4]};
      j.axis = {row[5], row[6]};
      j.local_a = {row[7], row[8]};
      j.local_b = {row[9], row[10]};
      j.local_axis = {row[11], row[12]};
      j.rest_angle = row[13];
    }

    for (int t = 0; t < states.rows; ++t) {
      SceneState s;
      s.time = t;
      s.joints = joints;
      s.objects.resize(n);
      const double* row = states.row(t);
      for (int i = 0; i < n; ++i) {
        const double* cell = row + i * kObjectCols;
        ObjectState& o = s.objects[i];
        o.position = {cell[0], cell[1]};
        o.velocity = {cell[2], cell[3]};
        o.orientation = cell[4];
        o.angular_velocity = cell[5];
        o.radius = cell[6];
        o.controlled = cell[7] != 0.0;
      }
      traj.states.push_back(std::move(s));
    }
    for (int t = 0; t < controls.rows; ++t)
      traj.controls.push_back({controls(t, 0), controls(t, 1)});
    require(traj.states.size() == traj.controls.size() + 1,
            path + ": inconsistent trajectory lengths");
    ds.trajectories.push_back(std::move(traj));
  }
  return ds;
}

void save_predictor(const PredictorNet& net, const std::string& path) {
  json meta;
  meta["kind"] = "physics";
  meta["sizes"] = sizes_to_json(net.stack().sizes());

  Writer w(path);
  w.magic(kCheckpointMagic);
  w.u32(kFormatVersion);
  w.u32(kFeatureLayoutVersion);
  const std::string meta_str = meta.dump();
  w.u64(meta_str.size());
  w.bytes(meta_str);

  std::vector<ParamRef> params;
  const_cast<PredictorNet&>(net).collect_params(params);
  w.u64(params.size() + 1);
  Tensor2 norm(2, 2);
  norm(0, 0) = net.norm.mean[0];
  norm(0, 1) = net.norm.mean[1];
  norm(1, 0) = net.norm.stddev[0];
  norm(1, 1) = net.norm.stddev[1];
  w.array({"velocity_norm", norm});
  for (const auto& p : params) w.array({p.name, *p.value});
  w.finish();
}

PredictorNet load_predictor(const std::string& path) {
  Reader r(path);
  r.expect_magic(kCheckpointMagic, "checkpoint");
  check_versions(r, path);
  const json meta = json::parse(r.bytes(r.u64()));
  require(meta.at("kind") == "physics", path + ": not a physics checkpoint");

  PredictorNet net(sizes_from_json(meta.at("sizes")));
  const std::uint64_t count = r.u64();
  require(count >= 1, path + ": empty checkpoint");
  NamedArray norm = r.array();
  require(norm.name == "velocity_norm" && norm.tensor.rows == 2 && norm.tensor.cols == 2,
          path + ": bad normalization block");
  net.norm.mean = {norm.tensor(0, 0), norm.tensor(0, 1)};
  net.norm.stddev = {norm.tensor(1, 0), norm.tensor(1, 1)};

  std::map<std::string, Tensor2> loaded;
  for (std::uint64_t i = 1; i < count; ++i) {
    NamedArray a = r.array();
    loaded.emplace(a.name, std::move(a.tensor));
  }
  std::vector<ParamRef> params;
  net.collect_params(params);
  for (auto& p : params) {
    auto it = loaded.find(p.name);
    require(it != loaded.end(), path + ": missing parameter " + p.name);
    require(it->second.same_shape(*p.value), path + ": shape mismatch for " + p.name);
    *p.value = std::move(it->second);
  }
  return net;
}

void save_belief(const BeliefNet& net, bool one_step_variant, const std::string& path) {
  json meta;
  meta["kind"] = "belief";
  meta["one_step_variant"] = one_step_variant;
  meta["sizes"] = sizes_to_json(net.stack().sizes());
  meta["recurrent_hidden"] = net.recurrent_hidden();

  Writer w(path);
  w.magic(kCheckpointMagic);
  w.u32(kFormatVersion);
  w.u32(kFeatureLayoutVersion);
  const std::string meta_str = meta.dump();
  w.u64(meta_str.size());
  w.bytes(meta_str);

  std::vector<ParamRef> params;
  const_cast<BeliefNet&>(net).collect_params(params);
  write_params(w, params);
  w.finish();
}

LoadedBelief load_belief(const std::string& path) {
  Reader r(path);
  r.expect_magic(kCheckpointMagic, "checkpoint");
  check_versions(r, path);
  const json meta = json::parse(r.bytes(r.u64()));
  require(meta.at("kind") == "belief", path + ": not a belief checkpoint");

  LoadedBelief lb;
  lb.net = BeliefNet(sizes_from_json(meta.at("sizes")), meta.at("recurrent_hidden").get<int>());
  lb.one_step_variant = meta.at("one_step_variant").get<bool>();
  std::vector<ParamRef> params;
  lb.net.collect_params(params);
  read_params_into(r, params, path);
  return lb;
}

std::string describe_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  require(in.gcount() == 8, path + ": truncated file");

  std::ostringstream out;
  if (std::memcmp(magic, kDatasetMagic, 8) == 0) {
    Dataset ds = load_dataset(path);
    out << "dataset (" << ds.split << ")\n";
    out << "  trajectories: " << ds.size() << "\n";
    if (!ds.trajectories.empty()) {
      out << "  steps per trajectory: " << ds.trajectories[0].step_count() << "\n";
      out << "  objects (incl. pusher): " << ds.trajectories[0].states[0].object_count()
          << "\n";
      int joints = 0;
      for (const auto& t : ds.trajectories)
        joints += static_cast<int>(t.states[0].joints.size());
      out << "  joints total: " << joints << "\n";
    }
    out << "  layout: " << (ds.gen.layout == SceneLayout::Sparse ? "sparse" : "dense") << "\n";
    out << "  environment: "
        << (ds.gen.environment_mode == EnvironmentMode::FixedOnly ? "fixed" : "mixed") << "\n";
    out << "  n_objects: " << ds.gen.n_objects << "\n";
    out << "  seed: " << ds.seed << "\n";
    out << "  dt: " << ds.sim.dt << ", push speed: " << ds.push.speed
        << ", push length: " << ds.push.length << "\n";
  } else if (std::memcmp(magic, kCheckpointMagic, 8) == 0) {
    Reader r(path);
    r.expect_magic(kCheckpointMagic, "checkpoint");
    check_versions(r, path);
    const json meta = json::parse(r.bytes(r.u64()));
    out << meta.at("kind").get<std::string>() << " checkpoint\n";
    const json& sizes = meta.at("sizes");
    out << "  code_dim: " << sizes.at("code_dim").get<int>() << "\n";
    out << "  prop_steps: " << sizes.at("prop_steps").get<int>() << "\n";
    if (meta.contains("one_step_variant"))
      out << "  one_step_variant: " << (meta.at("one_step_variant").get<bool>() ? "yes" : "no")
          << "\n";
    const std::uint64_t count = r.u64();
    std::uint64_t total = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
      NamedArray a = r.array();
      total += a.tensor.size();
    }
    out << "  arrays: " << count << ", total values: " << total << "\n";
  } else {
    fail(path + ": unrecognized file type");
  }
  return out.str();
}

}  // namespace pushrel
