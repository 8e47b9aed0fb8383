#include "juice/instance_io.hpp"

#include <fstream>

namespace juice {

namespace {

constexpr const char* kFormat = "juice-instance/1";

nlohmann::json matrices_to_json(const std::vector<CMatrix>& ms)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const CMatrix& m : ms)
        arr.push_back(matrix_to_json(m));
    return arr;
}

std::vector<CMatrix> matrices_from_json(const nlohmann::json& j)
{
    std::vector<CMatrix> out;
    for (const auto& m : j)
        out.push_back(matrix_from_json(m));
    return out;
}

} // namespace

nlohmann::json matrix_to_json(const CMatrix& m)
{
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(2 * m.size()));
    for (Eigen::Index k = 0; k < m.size(); ++k) {
        data.push_back(m.data()[k].real());
        data.push_back(m.data()[k].imag());
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

CMatrix matrix_from_json(const nlohmann::json& j)
{
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != 2 * rows * cols)
        throw ConfigError("instance: matrix data length does not match its shape");
    CMatrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k)
        m.data()[k] = cplx(data[static_cast<std::size_t>(2 * k)], data[static_cast<std::size_t>(2 * k + 1)]);
    return m;
}

nlohmann::json instance_to_json(const ProblemInstance& inst)
{
    nlohmann::json j;
    j["format"] = kFormat;
    j["seed"] = inst.seed;
    j["noise_var"] = inst.noise_var;
    j["users"] = inst.layout.n_users();
    j["clusters"] = inst.layout.n_clusters();
    j["activity_kind"] = std::string(to_string(inst.activity.kind));
    j["gamma"] = std::vector<int>(inst.activity.gamma.data(),
                                  inst.activity.gamma.data() + inst.activity.gamma.size());
    j["pilots"] = matrix_to_json(inst.pilots);
    j["channels"] = matrix_to_json(inst.channels);
    j["received"] = matrix_to_json(inst.received);
    j["precisions"] = matrices_to_json(inst.stats.precisions);
    j["covariances"] = matrices_to_json(inst.stats.covariances);
    j["powers"] = std::vector<double>(inst.stats.powers.data(),
                                      inst.stats.powers.data() + inst.stats.powers.size());
    j["prior_guess"] = matrices_to_json(inst.prior_guess);
    return j;
}

ProblemInstance instance_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format").get<std::string>() != kFormat)
            throw ConfigError("instance: unsupported format");
        ProblemInstance inst;
        inst.seed = j.at("seed").get<std::uint64_t>();
        inst.noise_var = j.at("noise_var").get<double>();
        inst.layout = ClusterLayout(j.at("users").get<Eigen::Index>(), j.at("clusters").get<Eigen::Index>());
        inst.activity.kind = parse_activity_kind(j.at("activity_kind").get<std::string>());
        const auto gamma = j.at("gamma").get<std::vector<int>>();
        inst.activity.gamma = Eigen::Map<const Eigen::VectorXi>(gamma.data(), static_cast<Eigen::Index>(gamma.size()));
        for (Eigen::Index i = 0; i < inst.activity.gamma.size(); ++i)
            if (inst.activity.gamma(i) != 0)
                inst.activity.active.push_back(i);
        inst.pilots = matrix_from_json(j.at("pilots"));
        inst.channels = matrix_from_json(j.at("channels"));
        inst.received = matrix_from_json(j.at("received"));
        inst.stats.precisions = matrices_from_json(j.at("precisions"));
        inst.stats.covariances = matrices_from_json(j.at("covariances"));
        const auto powers = j.at("powers").get<std::vector<double>>();
        inst.stats.powers = Eigen::Map<const RVector>(powers.data(), static_cast<Eigen::Index>(powers.size()));
        inst.prior_guess = matrices_from_json(j.at("prior_guess"));
        return inst;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("instance: ") + e.what());
    }
}

void save_instance(const ProblemInstance& instance, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write instance to " + path.string());
    out << instance_to_json(instance).dump() << '\n';
}

ProblemInstance load_instance(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open instance " + path.string());
    nlohmann::json j;
    in >> j;
    return instance_from_json(j);
}

} // namespace juice
