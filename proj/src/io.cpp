#include "pvdyn/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pvdyn/errors.hpp"

namespace pvdyn {

using nlohmann::json;

namespace {

json parse_document(std::string_view document, const char* what) {
  try {
    return json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line number for the diagnostic.
    std::size_t line = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte, document.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (document[i] == '\n') ++line;
    }
    std::ostringstream os;
    os << what << " document, line " << line << ": " << e.what();
    throw LoadError(os.str());
  }
}

Vec3 read_vec3(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3) throw LoadError(ctx + ": expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number()) throw LoadError(ctx + ": expected numbers");
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

VecX read_vecx(const json& j, const std::string& ctx) {
  if (!j.is_array()) throw LoadError(ctx + ": expected an array");
  VecX v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw LoadError(ctx + ": expected numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

json vec_json(const Eigen::Ref<const VecX>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

JointKind parse_kind(const std::string& s, const std::string& ctx) {
  if (s == "revolute") return JointKind::Revolute;
  if (s == "prismatic") return JointKind::Prismatic;
  if (s == "floating") return JointKind::Floating;
  throw LoadError(ctx + ": unknown joint kind '" + s + "'");
}

struct RawLink {
  Link link;
  json parent;
};

int resolve_link(const json& ref, const RobotModel& model, const std::string& ctx) {
  if (ref.is_number_integer()) {
    const int idx = ref.get<int>();
    if (idx < 0 || idx >= model.num_links()) throw LoadError(ctx + ": link index out of range");
    return idx;
  }
  if (ref.is_string()) {
    const int idx = model.find_link(ref.get<std::string>());
    if (idx < 0) throw LoadError(ctx + ": unknown link '" + ref.get<std::string>() + "'");
    return idx;
  }
  throw LoadError(ctx + ": link must be an index or a name");
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RobotModel load_model(std::string_view document) {
  const json doc = parse_document(document, "model");
  if (!doc.is_object() || !doc.contains("links") || !doc["links"].is_array()) {
    throw LoadError("model document: missing 'links' array");
  }
  std::vector<RawLink> raw;
  std::map<std::string, std::size_t> by_name;
  bool named_parents = false;
  for (std::size_t i = 0; i < doc["links"].size(); ++i) {
    const json& jl = doc["links"][i];
    const std::string ctx = "link " + std::to_string(i);
    RawLink r;
    r.link.name = jl.value("name", "link" + std::to_string(i));
    if (by_name.count(r.link.name)) throw LoadError(ctx + ": duplicate link name '" + r.link.name + "'");
    by_name[r.link.name] = i;
    r.parent = jl.contains("parent") ? jl["parent"] : json(nullptr);
    if (r.parent.is_string()) named_parents = true;
    if (!jl.contains("joint")) throw LoadError(ctx + ": missing 'joint'");
    const json& jj = jl["joint"];
    r.link.joint.kind = parse_kind(jj.value("kind", std::string("?")), ctx);
    if (jj.contains("axis")) {
      const Vec3 axis = read_vec3(jj["axis"], ctx + " axis");
      if (!(axis.norm() > 0.0)) throw LoadError(ctx + ": zero joint axis");
      // Already-unit axes are kept bit for bit so documents round-trip.
      r.link.joint.axis = std::abs(axis.norm() - 1.0) > 1e-14 ? Vec3(axis.normalized()) : axis;
    }
    if (jj.contains("xyz")) r.link.joint.origin_xyz = read_vec3(jj["xyz"], ctx + " xyz");
    if (jj.contains("rpy")) r.link.joint.origin_rpy = read_vec3(jj["rpy"], ctx + " rpy");
    if (!jl.contains("mass") || !jl["mass"].is_number()) throw LoadError(ctx + ": missing 'mass'");
    r.link.mass = jl["mass"].get<double>();
    if (!(r.link.mass > 0.0)) throw LoadError(ctx + " ('" + r.link.name + "'): nonpositive mass");
    if (jl.contains("com")) r.link.com = read_vec3(jl["com"], ctx + " com");
    if (jl.contains("inertia6")) {
      const VecX I = read_vecx(jl["inertia6"], ctx + " inertia6");
      if (I.size() != 6) throw LoadError(ctx + ": inertia6 needs 6 entries");
      Mat3 M;
      M << I(0), I(3), I(4),
           I(3), I(1), I(5),
           I(4), I(5), I(2);
      r.link.inertia_com = M;
    }
    raw.push_back(std::move(r));
  }

  const std::size_t n = raw.size();
  // Parent of each raw link as a raw index, -1 for the world.
  std::vector<int> parent_raw(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const json& p = raw[i].parent;
    const std::string ctx = "link " + std::to_string(i) + " ('" + raw[i].link.name + "')";
    if (p.is_null()) continue;
    if (p.is_number_integer()) {
      const int idx = p.get<int>();
      if (idx < 0) continue;
      if (named_parents) throw LoadError(ctx + ": mixing parent indices and names is not supported");
      if (idx >= static_cast<int>(i)) {
        throw LoadError(ctx + ": parent index " + std::to_string(idx) +
                        " does not precede the link (topological order required)");
      }
      parent_raw[i] = idx;
    } else if (p.is_string()) {
      const auto it = by_name.find(p.get<std::string>());
      if (it == by_name.end()) throw LoadError(ctx + ": unknown parent '" + p.get<std::string>() + "'");
      parent_raw[i] = static_cast<int>(it->second);
    } else {
      throw LoadError(ctx + ": parent must be an index, a name or null");
    }
  }

  // Topological reindexing (stable: keeps document order among ready links).
  std::vector<int> order;
  std::vector<int> new_index(n, -1);
  std::vector<char> placed(n, 0);
  while (order.size() < n) {
    bool progress = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (placed[i]) continue;
      const int p = parent_raw[i];
      if (p < 0 || placed[static_cast<std::size_t>(p)]) {
        placed[i] = 1;
        new_index[i] = static_cast<int>(order.size());
        order.push_back(static_cast<int>(i));
        progress = true;
      }
    }
    if (!progress) {
      std::string names;
      for (std::size_t i = 0; i < n; ++i) {
        if (!placed[i]) names += (names.empty() ? "" : ", ") + raw[i].link.name;
      }
      throw LoadError("model document: cycle detected among links {" + names + "}");
    }
  }

  std::vector<Link> links;
  links.reserve(n);
  for (int raw_idx : order) {
    Link l = raw[static_cast<std::size_t>(raw_idx)].link;
    const int p = parent_raw[static_cast<std::size_t>(raw_idx)];
    l.parent = p < 0 ? -1 : new_index[static_cast<std::size_t>(p)];
    links.push_back(std::move(l));
  }

  Vec3 gravity(0.0, 0.0, -9.81);
  if (doc.contains("gravity")) gravity = read_vec3(doc["gravity"], "gravity");
  RobotModel model;
  try {
    model = RobotModel(std::move(links), gravity);
  } catch (const ModelError& e) {
    throw LoadError(std::string("model document: ") + e.what());
  }
  if (doc.contains("floating_base") && doc["floating_base"].get<bool>() != model.floating_base()) {
    throw LoadError("model document: 'floating_base' disagrees with the joint of link 0");
  }
  return model;
}

RobotModel load_model_file(const std::string& path) { return load_model(read_text_file(path)); }

std::string serialize_model(const RobotModel& model) {
  json doc;
  doc["floating_base"] = model.floating_base();
  doc["gravity"] = vec_json(model.gravity());
  json links = json::array();
  for (const Link& l : model.links()) {
    json jl;
    jl["name"] = l.name;
    jl["parent"] = l.parent;
    jl["joint"] = {{"kind", to_string(l.joint.kind)},
                   {"axis", vec_json(l.joint.axis)},
                   {"xyz", vec_json(l.joint.origin_xyz)},
                   {"rpy", vec_json(l.joint.origin_rpy)}};
    jl["mass"] = l.mass;
    jl["com"] = vec_json(l.com);
    const Mat3& I = l.inertia_com;
    jl["inertia6"] = {I(0, 0), I(1, 1), I(2, 2), I(0, 1), I(0, 2), I(1, 2)};
    links.push_back(std::move(jl));
  }
  doc["links"] = std::move(links);
  return doc.dump(2);
}

ConstraintDocument load_constraints(std::string_view document, const RobotModel& model) {
  const json doc = parse_document(document, "constraint");
  if (!doc.is_object() || !doc.contains("constraints") || !doc["constraints"].is_array()) {
    throw LoadError("constraint document: missing 'constraints' array");
  }
  ConstraintDocument out;
  for (std::size_t i = 0; i < doc["constraints"].size(); ++i) {
    const json& jc = doc["constraints"][i];
    const std::string ctx = "constraint " + std::to_string(i);
    if (!jc.contains("link")) throw LoadError(ctx + ": missing 'link'");
    const int link = resolve_link(jc["link"], model, ctx);
    const std::string type = jc.value("type", std::string("acceleration"));
    if (type == "world_point" || type == "world_weld") {
      AnchoredConstraint a;
      a.family = type == "world_point" ? AnchoredConstraint::Family::WorldPoint
                                       : AnchoredConstraint::Family::WorldWeld;
      a.link = link;
      if (jc.contains("point")) a.point = read_vec3(jc["point"], ctx + " point");
      if (jc.contains("anchor")) a.anchor = read_vec3(jc["anchor"], ctx + " anchor");
      if (jc.contains("axes")) {
        for (const json& ax : jc["axes"]) {
          const Vec3 v = read_vec3(ax, ctx + " axes");
          if (!(v.norm() > 0.0)) throw LoadError(ctx + ": zero constraint axis");
          a.axes.push_back(v.normalized());
        }
      }
      if (jc.contains("soft_weight")) {
        const double w = jc["soft_weight"].get<double>();
        if (!(w > 0.0)) throw LoadError(ctx + ": soft_weight must be positive");
        a.soft_weight = w;
      }
      out.anchored.push_back(std::move(a));
      continue;
    }
    if (type != "acceleration") throw LoadError(ctx + ": unknown constraint type '" + type + "'");
    if (!jc.contains("K") || !jc["K"].is_array()) throw LoadError(ctx + ": missing 'K'");
    ConstraintEntry e;
    e.link = link;
    const json& jK = jc["K"];
    e.K.resize(static_cast<Eigen::Index>(jK.size()), 6);
    for (std::size_t r = 0; r < jK.size(); ++r) {
      const VecX row = read_vecx(jK[r], ctx + " K row");
      if (row.size() != 6) throw LoadError(ctx + ": every K row needs 6 entries");
      e.K.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    e.k = jc.contains("k") ? read_vecx(jc["k"], ctx + " k") : VecX::Zero(e.K.rows());
    if (e.k.size() != e.K.rows()) throw LoadError(ctx + ": k must have one entry per K row");
    if (jc.contains("soft_weight")) {
      VecX w = read_vecx(jc["soft_weight"], ctx + " soft_weight");
      if (w.size() == 1 && e.K.rows() > 1) w = VecX::Constant(e.K.rows(), w(0));
      if (w.size() != e.K.rows()) throw LoadError(ctx + ": soft_weight must have one entry per row");
      if (!(w.array() > 0.0).all()) throw LoadError(ctx + ": soft_weight entries must be positive");
      e.soft_weight = std::move(w);
    }
    for (Eigen::Index r = 0; r < e.K.rows(); ++r) {
      if (!(e.K.row(r).norm() > 0.0)) throw LoadError(ctx + ": zero K row");
    }
    out.constraints.add(std::move(e));
  }
  out.constraints.normalize();
  return out;
}

ConstraintDocument load_constraints_file(const std::string& path, const RobotModel& model) {
  return load_constraints(read_text_file(path), model);
}

std::string serialize_constraints(const ConstraintSet& constraints) {
  json arr = json::array();
  for (const auto& e : constraints.entries()) {
    json jc;
    jc["link"] = e.link;
    json K = json::array();
    for (Eigen::Index r = 0; r < e.K.rows(); ++r) K.push_back(vec_json(e.K.row(r).transpose()));
    jc["K"] = std::move(K);
    jc["k"] = vec_json(e.k);
    if (e.soft_weight) jc["soft_weight"] = vec_json(*e.soft_weight);
    arr.push_back(std::move(jc));
  }
  json doc;
  doc["constraints"] = std::move(arr);
  return doc.dump(2);
}

}  // namespace pvdyn
