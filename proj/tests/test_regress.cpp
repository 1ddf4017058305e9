#include "support.hpp"

#include <gtest/gtest.h>

using namespace posloss;

namespace
{
std::vector<TrainingRow> constant_rows(double target, std::size_t n)
{
    std::vector<TrainingRow> rows;
    RandomStream r(2, 0);
    for (std::size_t i = 0; i < n; ++i)
        rows.push_back({{10 * r.uniform(), 10 * r.uniform(), 1.5, 10 * r.uniform(), 10 * r.uniform(), 1.5}, target});
    return rows;
}

const std::vector<TrainingRow> toy_rows = {
    {{0, 0, 1.5, 1, 0, 1.5}, 50.0},
    {{0, 0, 1.5, 9, 0, 1.5}, 70.0},
};

struct TruthSet
{
    std::vector<TrainingRow> train, test;
};

double truth_oracle(const PositionPair& p)
{
    // FSPL(1 m) + 10 * 1.7 * log10(d)
    return test::fspl_oracle(1.0, 5220.0) + 17.0 * std::log10(distance(p.tx, p.rx));
}

/// Log-distance truth (no fading) over `n` random positions with a few samples each,
/// split 80/20 per sample as the dataset module does.
TruthSet log_distance_truth(std::size_t n, std::uint64_t seed, std::size_t samples_per_position = 3)
{
    SyntheticSpec spec;
    spec.n_pairs = n;
    spec.seed = seed;
    std::vector<TrainingRow> rows;
    for (const auto& p : synthetic_pairs(spec))
        for (std::size_t k = 0; k < samples_per_position; ++k)
            rows.push_back({features(p), truth_oracle(p)});
    const auto labels = split_labels(rows.size(), 0.8, seed);
    TruthSet s;
    for (std::size_t i = 0; i < rows.size(); ++i)
        (labels[i] == SplitLabel::train ? s.train : s.test).push_back(rows[i]);
    return s;
}

/// Held-out positions: rx walks away from a fixed tx along two axes; every 5th distance on each axis is unseen.
TruthSet held_out_positions()
{
    SyntheticSpec spec;
    spec.n_pairs = 500;
    spec.layout = SyntheticSpec::Layout::axes;
    TruthSet s;
    const auto pairs = synthetic_pairs(spec);
    for (std::size_t i = 0; i < pairs.size(); ++i)
        (i % 10 >= 8 && i > 10 ? s.test : s.train).push_back({features(pairs[i]), truth_oracle(pairs[i])});
    return s;
}

SvrParams tuned_svr()
{
    SvrParams p;
    p.c = 10.0;
    p.gamma_mode = "1";
    return p;
}
}  // namespace

TEST(Gbrt, ConstantTarget)
{
    const auto m = train_gbrt(constant_rows(62.0, 50));
    EXPECT_EQ(m.base_prediction, 62.0);
    RandomStream r(3, 0);
    for (int i = 0; i < 100; ++i)
        EXPECT_DOUBLE_EQ(m.predict({r.uniform(), 3, 1, 4, 1, 5}), 62.0);
}

TEST(Gbrt, SeparableToyFitsExactly)
{
    const auto m = train_gbrt(toy_rows, {.n_trees = 50, .max_depth = 1});
    EXPECT_NEAR(m.predict(toy_rows[0].first), 50.0, 0.1);
    EXPECT_NEAR(m.predict(toy_rows[1].first), 70.0, 0.1);
}

TEST(Gbrt, ZeroTreesPredictBase)
{
    GbrtModel m;
    m.base_prediction = 42.5;
    EXPECT_EQ(m.predict({1, 2, 3, 4, 5, 6}), 42.5);
}

TEST(Gbrt, EmptyTrainingSetRejected)
{
    EXPECT_THROW(train_gbrt({}), ValidationError);
}

TEST(Gbrt, LogDistanceTestMse)
{
    const auto s = log_distance_truth(500, 21);
    EXPECT_LE(evaluate_mse(train_gbrt(s.train), s.test), 1.0);
}

TEST(Gbrt, GeneralizesToUnseenDistances)
{
    const auto s = held_out_positions();
    EXPECT_LE(evaluate_mse(train_gbrt(s.train), s.test), 1.0);
}

TEST(Gbrt, TiesPickLowestFeatureThenLowestThreshold)
{
    // features 0 and 1 carry the same values, and y is symmetric, so the splits at
    // 1.5 and 3.5 on either feature have identical gain.
    std::vector<TrainingRow> rows;
    const double y[] = {0, 5, 5, 0};
    for (int i = 0; i < 4; ++i)
        rows.push_back({{double(i + 1), double(i + 1), 0, 0, 0, 0}, y[i]});
    const auto m = train_gbrt(rows, {.n_trees = 1, .max_depth = 1});
    ASSERT_EQ(m.trees.size(), 1u);
    const auto& root = m.trees[0].nodes[0];
    EXPECT_EQ(root.feature, 0);
    EXPECT_EQ(root.threshold, 1.5);
}

TEST(Gbrt, LeafValuesFiniteAndFeaturesInRange)
{
    const auto s = log_distance_truth(200, 4);
    const auto m = train_gbrt(s.train);
    for (const auto& t : m.trees)
        for (const auto& n : t.nodes)
        {
            EXPECT_TRUE(std::isfinite(n.value));
            EXPECT_GE(n.feature, -1);
            EXPECT_LT(n.feature, 6);
        }
}

// Property: training MSE never increases when a tree is added.
TEST(GbrtProperty, MonotoneTrainingLoss)
{
    for (std::uint64_t seed : {1, 2, 3})
    {
        SyntheticSpec spec;
        spec.n_pairs = 60;
        spec.samples_per_pair = 4;
        spec.seed = seed;
        std::vector<TrainingRow> rows;
        for (const auto& s : generate_synthetic(spec))
            rows.push_back({features(s.pair), *s.loss_db});
        GbrtTrainingLog log;
        train_gbrt(rows, {.n_trees = 60, .max_depth = 3}, &log);
        ASSERT_EQ(log.stage_mse.size(), 61u);
        for (std::size_t k = 1; k < log.stage_mse.size(); ++k)
            EXPECT_LE(log.stage_mse[k], log.stage_mse[k - 1] + 1e-12) << "stage " << k;
    }
}

TEST(GbrtProperty, DeterministicGivenSeed)
{
    const auto s = log_distance_truth(100, 8);
    const auto a = train_gbrt(s.train, {.subsample = 0.7, .seed = 5});
    const auto b = train_gbrt(s.train, {.subsample = 0.7, .seed = 5});
    EXPECT_EQ(serialize_model(a), serialize_model(b));
}

TEST(GbrtProperty, ShiftedPositionsKeepSplitStructure)
{
    const auto s = log_distance_truth(150, 9);
    auto shifted = s.train;
    for (auto& [v, y] : shifted)
        for (auto& x : v)
            x += 250.0;
    const auto a = train_gbrt(s.train, {.n_trees = 20});
    const auto b = train_gbrt(shifted, {.n_trees = 20});
    ASSERT_EQ(a.trees.size(), b.trees.size());
    for (std::size_t t = 0; t < a.trees.size(); ++t)
    {
        ASSERT_EQ(a.trees[t].nodes.size(), b.trees[t].nodes.size());
        for (std::size_t i = 0; i < a.trees[t].nodes.size(); ++i)
        {
            const auto& na = a.trees[t].nodes[i];
            const auto& nb = b.trees[t].nodes[i];
            EXPECT_EQ(na.feature, nb.feature);
            EXPECT_EQ(na.left, nb.left);
            if (na.feature >= 0)
                EXPECT_NEAR(nb.threshold - na.threshold, 250.0, 1e-9);
        }
    }
}

TEST(Svr, ConstantTargetInsideTube)
{
    const auto m = train_svr(constant_rows(62.0, 60));
    RandomStream r(4, 0);
    for (int i = 0; i < 100; ++i)
        EXPECT_NEAR(m.predict({10 * r.uniform(), 10 * r.uniform(), 1.5, 10 * r.uniform(), 3, 1.5}), 62.0, 0.1);
}

TEST(Svr, GammaScaleIsOneSixth)
{
    const auto s = log_distance_truth(60, 10);
    auto rows = s.train;
    for (std::size_t i = 0; i < rows.size(); ++i)
        rows[i].first[2] = rows[i].first[5] = 1.0 + 0.1 * static_cast<double>(i % 7);
    EXPECT_NEAR(train_svr(rows).kernel_gamma, 1.0 / 6.0, 1e-12);
}

TEST(Svr, ZeroSupportVectorsPredictBias)
{
    SvrModel m;
    m.bias = 61.25;
    m.feature_scales = {1, 1, 1, 1, 1, 1};
    EXPECT_EQ(m.predict({1, 2, 3, 4, 5, 6}), 61.25);
}

TEST(Svr, SeparableToyWithinTube)
{
    SvrParams p = tuned_svr();
    p.c = 100.0;
    const auto m = train_svr(toy_rows, p);
    EXPECT_NEAR(m.predict(toy_rows[0].first), 50.0, p.epsilon + 0.1);
    EXPECT_NEAR(m.predict(toy_rows[1].first), 70.0, p.epsilon + 0.1);
}

TEST(Svr, DuplicatePointWithinEpsilonPlusTolerance)
{
    std::vector<TrainingRow> rows;
    for (int i = 0; i < 12; ++i)
        rows.push_back({{0, 0, 1.5, 1.0 + i, 0, 1.5}, 50.0 + 2.0 * i});
    rows.push_back(rows[5]);  // exact duplicate
    SvrParams p = tuned_svr();
    p.c = 1000.0;
    const auto m = train_svr(rows, p);
    EXPECT_TRUE(m.converged);
    EXPECT_LE(std::abs(m.predict(rows[5].first) - rows[5].second), p.epsilon + p.tolerance);
}

TEST(Svr, LogDistanceTestMse)
{
    const auto s = log_distance_truth(500, 21);
    EXPECT_LE(evaluate_mse(train_svr(s.train, tuned_svr()), s.test), 1.0);
}

TEST(Svr, GeneralizesToUnseenDistances)
{
    const auto s = held_out_positions();
    EXPECT_LE(evaluate_mse(train_svr(s.train, tuned_svr()), s.test), 1.0);
}

TEST(Svr, NonConvergenceIsFlagged)
{
    const auto s = log_distance_truth(100, 12);
    SvrParams p;
    p.max_iterations = 2;
    const auto m = train_svr(s.train, p);
    EXPECT_FALSE(m.converged);
    EXPECT_EQ(m.iterations, 2u);
}

TEST(Svr, InvalidParametersRejected)
{
    SvrParams p;
    p.c = 0.0;
    EXPECT_THROW(train_svr(toy_rows, p), ValidationError);
    p = {};
    p.epsilon = -1.0;
    EXPECT_THROW(train_svr(toy_rows, p), ValidationError);
    p = {};
    p.gamma_mode = "wide";
    EXPECT_THROW(train_svr(toy_rows, p), ValidationError);
    EXPECT_THROW(train_svr({}, {}), ValidationError);
}

// Property: coefficients bounded by C (times merged multiplicity) and zero for points strictly inside the tube.
TEST(SvrProperty, EpsilonTubeAndKkt)
{
    SyntheticSpec spec;
    spec.n_pairs = 120;
    spec.samples_per_pair = 1;
    spec.seed = 13;
    std::vector<TrainingRow> rows;
    for (const auto& s : generate_synthetic(spec))
        rows.push_back({features(s.pair), *s.loss_db});
    SvrParams p = tuned_svr();
    p.epsilon = 0.5;
    const auto m = train_svr(rows, p);
    ASSERT_TRUE(m.converged);
    ASSERT_EQ(m.dual_coefficients.size(), m.support_vectors.size());
    for (std::size_t i = 0; i < m.dual_coefficients.size(); ++i)
        EXPECT_LE(std::abs(m.dual_coefficients[i]), p.c * m.multiplicity[i] + 1e-12);

    std::size_t inside = 0;
    for (const auto& [v, y] : rows)
    {
        const double residual = m.predict(v) - y;
        if (std::abs(residual) >= p.epsilon - p.tolerance)
            continue;
        ++inside;
        const auto z = m.standardize(v);
        EXPECT_EQ(std::find(m.support_vectors.begin(), m.support_vectors.end(), z), m.support_vectors.end())
            << "point inside the tube carries a nonzero coefficient";
    }
    EXPECT_GT(inside, 0u);
}

TEST(SvrProperty, TranslationInvariance)
{
    const auto s = log_distance_truth(120, 14);
    auto shifted = s.train;
    for (auto& [v, y] : shifted)
        for (auto& x : v)
            x += 100.0;
    const auto a = train_svr(s.train, tuned_svr());
    const auto b = train_svr(shifted, tuned_svr());
    for (auto [v, y] : s.test)
    {
        const double pa = a.predict(v);
        for (auto& x : v)
            x += 100.0;
        EXPECT_NEAR(b.predict(v), pa, 1e-6);
    }
}

TEST(RegressProperty, DirectionSensitivity)
{
    SyntheticSpec spec;
    spec.n_pairs = 300;
    spec.samples_per_pair = 1;
    spec.fading.sd_db = 0.0;
    spec.asymmetry_db = 10.0;
    spec.seed = 15;
    std::vector<TrainingRow> rows;
    const auto pairs = synthetic_pairs(spec);
    for (const auto& p : pairs)
    {
        rows.push_back({features(p), synthetic_path_loss(spec, p)});
        const PositionPair swapped{p.rx, p.tx};
        rows.push_back({features(swapped), synthetic_path_loss(spec, swapped)});
    }
    const auto g = train_gbrt(rows);
    const auto probe = pairs.front();
    const PositionPair back{probe.rx, probe.tx};
    EXPECT_GT(std::abs(g.predict(features(probe)) - g.predict(features(back))), 5.0);

    // symmetric data: swapped predictions agree to within the fit error
    spec.asymmetry_db = 0.0;
    for (auto& [v, y] : rows)
        y = synthetic_path_loss(spec, pair_from_features(v));
    const auto sym = train_gbrt(rows);
    EXPECT_LT(std::abs(sym.predict(features(probe)) - sym.predict(features(back))), 1.0);
}

TEST(RegressProperty, PredictionIsPure)
{
    const auto s = log_distance_truth(80, 16);
    const PathLossModel m = train_svr(s.train, tuned_svr());
    for (const auto& [v, y] : s.test)
        EXPECT_EQ(predict(m, v), predict(m, v));
}

TEST(EvaluateMse, ZeroForPerfectPredictions)
{
    GbrtModel m;
    m.base_prediction = 60.0;
    const std::vector<TrainingRow> rows = {{{0, 0, 0, 1, 0, 0}, 60.0}, {{0, 0, 0, 2, 0, 0}, 60.0}};
    EXPECT_EQ(evaluate_mse(m, rows), 0.0);
}

TEST(EvaluateMse, HandArithmetic)
{
    GbrtModel m;
    m.base_prediction = 60.0;
    const std::vector<TrainingRow> rows = {{{0, 0, 0, 1, 0, 0}, 59.0}, {{0, 0, 0, 2, 0, 0}, 61.0}};
    EXPECT_EQ(evaluate_mse(m, rows), 1.0);
    EXPECT_THROW(evaluate_mse(m, std::vector<TrainingRow>{}), ValidationError);
}

class ModelFile : public ::testing::Test
{
protected:
    test::TempDir dir;
    TruthSet data = log_distance_truth(150, 17);
};

TEST_F(ModelFile, RoundTripIsPredictionExact)
{
    const std::vector<PathLossModel> models = {train_gbrt(data.train), train_svr(data.train, tuned_svr())};
    RandomStream r(18, 0);
    for (const auto& m : models)
    {
        save_model(m, dir.file("m.bin"));
        const auto back = load_model(dir.file("m.bin"));
        EXPECT_EQ(back.index(), m.index());
        for (int i = 0; i < 1000; ++i)
        {
            const FeatureVector v{60 * r.uniform(), 60 * r.uniform(), 1.5, 60 * r.uniform(), 60 * r.uniform(), 1.5};
            ASSERT_EQ(std::bit_cast<std::uint64_t>(predict(back, v)), std::bit_cast<std::uint64_t>(predict(m, v)));
        }
    }
}

TEST_F(ModelFile, KindMismatchRejected)
{
    save_model(train_gbrt(data.train, {.n_trees = 3}), dir.file("g.bin"));
    EXPECT_THROW(load_model_as<SvrModel>(dir.file("g.bin")), ValidationError);
    EXPECT_NO_THROW(load_model_as<GbrtModel>(dir.file("g.bin")));
}

TEST_F(ModelFile, UnknownKindRejected)
{
    auto bytes = serialize_model(train_gbrt(data.train, {.n_trees = 3}));
    bytes[12] = 9;  // kind tag follows the 8-byte magic and 4-byte version
    EXPECT_THROW(deserialize_model(bytes), ValidationError);
}

TEST_F(ModelFile, VersionMismatchRejected)
{
    auto bytes = serialize_model(train_gbrt(data.train, {.n_trees = 3}));
    bytes[8] = 2;
    EXPECT_THROW(deserialize_model(bytes), ValidationError);
}

TEST_F(ModelFile, TruncationAndTrailingBytesRejected)
{
    for (const PathLossModel m : {PathLossModel(train_gbrt(data.train, {.n_trees = 3})),
             PathLossModel(train_svr(data.train, tuned_svr()))})
    {
        auto bytes = serialize_model(m);
        for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1})
            EXPECT_THROW(deserialize_model(std::span<const char>(bytes.data(), cut)), ValidationError) << cut;
        bytes.push_back(0);
        EXPECT_THROW(deserialize_model(bytes), ValidationError);
    }
}

TEST_F(ModelFile, BadMagicAndMissingFile)
{
    csv::write_file(dir.file("x.bin"), "hello, this is not a model");
    EXPECT_THROW(load_model(dir.file("x.bin")), ValidationError);
    EXPECT_THROW(load_model(dir.file("missing.bin")), IoError);
}

TEST_F(ModelFile, LittleEndianHeader)
{
    const auto bytes = serialize_model(GbrtModel{});
    EXPECT_EQ(std::string(bytes.data(), 8), "PLOSSMDL");
    EXPECT_EQ(bytes[8], 1);
    EXPECT_EQ(bytes[9], 0);
    EXPECT_EQ(bytes[12], 1);  // GBRT
}
