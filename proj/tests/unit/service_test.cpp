#include "support.hpp"

#include <sweepscope/service.hpp>

#include <gtest/gtest.h>

#include <thread>

using namespace sweepscope;
using testing_support::TempDir;

namespace {

class ServiceFixture : public ::testing::Test {
protected:
    static void SetUpTestSuite()
    {
        blobs_dir_ = new TempDir("svc-blobs");
        persist_run(testing_support::run_config(testing_support::blobs_config(2, 6)), blobs_dir_->str());
        topics_dir_ = new TempDir("svc-topics");
        auto j = Json::parse(R"({
            "method": "nmf",
            "sweep": {"param": "k", "start": 2, "stop": 4},
            "fixed": {"seed": 0, "max_iter": 200},
            "input": {"synthetic": {"kind": "planted_topics", "n_items": 60, "topics": 3, "vocabulary": 10, "doc_length": 30, "seed": 2}}
        })");
        persist_run(testing_support::run_config(j), topics_dir_->str());
    }

    static void TearDownTestSuite()
    {
        delete blobs_dir_;
        delete topics_dir_;
    }

    struct Running {
        Service service;
        int port = 0;
        std::thread thread;

        explicit Running(const std::string& dir) : service(dir)
        {
            port = service.bind_any_port("127.0.0.1");
            thread = std::thread([this] { service.listen_after_bind(); });
            service.server().wait_until_ready();
        }
        ~Running()
        {
            service.stop();
            thread.join();
        }
        httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
    };

    static TempDir* blobs_dir_;
    static TempDir* topics_dir_;
};

TempDir* ServiceFixture::blobs_dir_ = nullptr;
TempDir* ServiceFixture::topics_dir_ = nullptr;

Json body(const httplib::Result& r) { return Json::parse(r->body); }

}  // namespace

TEST_F(ServiceFixture, RunAndIterationEndpoints)
{
    Running srv(blobs_dir_->str());
    auto cli = srv.client();
    auto r = cli.Get("/run");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    const auto run = body(r);
    EXPECT_EQ(run["iterations"].size(), 5u);
    EXPECT_EQ(run["default_threshold"], 2);
    EXPECT_EQ(run["directions"]["davies_bouldin"], "lower_better");

    r = cli.Get("/iterations/3");
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(body(r)["items"].size(), 300u);
    EXPECT_EQ(cli.Get("/iterations/99")->status, 404);
}

TEST_F(ServiceFixture, TransitionsAndVisibility)
{
    Running srv(blobs_dir_->str());
    auto cli = srv.client();
    auto r = cli.Get("/transitions?from=2&to=3");
    ASSERT_EQ(r->status, 200);
    EXPECT_EQ(cli.Get("/transitions?from=2")->status, 422);
    EXPECT_EQ(cli.Get("/transitions?from=2&to=77")->status, 404);

    r = cli.Post("/visibility", R"({"keys": ["2", "4", "6"]})", "application/json");
    ASSERT_EQ(r->status, 200);
    const auto pairs = body(cli.Get("/visible_pairs"));
    ASSERT_EQ(pairs.size(), 2u);
    EXPECT_EQ(pairs[0]["from"], "2");
    EXPECT_EQ(pairs[0]["to"], "4");
    EXPECT_EQ(cli.Post("/visibility", R"({"keys": ["2"]})", "application/json")->status, 422);
    EXPECT_EQ(cli.Post("/visibility", R"({"keys": 5})", "application/json")->status, 400);
    EXPECT_EQ(cli.Post("/visibility", "not json", "application/json")->status, 422);
}

TEST_F(ServiceFixture, ArchetypesThresholdAndEmbedding)
{
    Running srv(blobs_dir_->str());
    auto cli = srv.client();
    ASSERT_EQ(cli.Get("/archetypes")->status, 200);
    const auto curve = body(cli.Get("/archetypes/sweep"));
    EXPECT_EQ(curve.size(), 3u);
    EXPECT_EQ(cli.Post("/archetypes/threshold", R"({"value": 1})", "application/json")->status, 422);
    EXPECT_EQ(cli.Post("/archetypes/threshold", R"({"value": 1000})", "application/json")->status, 422);
    EXPECT_EQ(cli.Post("/archetypes/threshold", R"({"value": "x"})", "application/json")->status, 422);
    auto r = cli.Post("/archetypes/threshold", R"({"value": 4})", "application/json");
    ASSERT_EQ(r->status, 200);
    EXPECT_EQ(body(r)["threshold"], 4);

    r = cli.Get("/embedding?method=mds&color_mode=by_archetype");
    ASSERT_EQ(r->status, 200);
    EXPECT_EQ(cli.Get("/embedding?method=umap")->status, 404);
    EXPECT_EQ(cli.Get("/embedding?color_mode=rainbow")->status, 422);
    EXPECT_EQ(cli.Get("/violins?channel=split")->status, 200);
    EXPECT_EQ(cli.Get("/violins?channel=sideways")->status, 422);
}

TEST_F(ServiceFixture, ClassesExportAsCsv)
{
    Running srv(blobs_dir_->str());
    auto cli = srv.client();
    auto r = cli.Post("/class", R"({"type": "full", "iteration": "3", "attributes": ["truth"]})", "application/json");
    ASSERT_EQ(r->status, 200);
    const auto id = body(r)["id"].get<std::string>();
    EXPECT_EQ(id, "iteration_3");
    r = cli.Get("/class/" + id + ".csv");
    ASSERT_EQ(r->status, 200);
    const auto parsed = class_from_csv(r->body);
    EXPECT_EQ(parsed.item_ids.size(), 300u);
    EXPECT_EQ(parse_csv(r->body).front(), (CsvRow{"item_id", "iteration_3", "truth"}));

    r = cli.Post("/class", R"({"type": "transition", "from": "2", "to": "3", "group": 0, "direction": "from"})",
                 "application/json");
    EXPECT_EQ(r->status, 200);
    r = cli.Post("/class", R"({"type": "connector", "left": {"iteration": "2", "group": 0}, "right": {"iteration": "3", "group": 1}})",
                 "application/json");
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(cli.Post("/class", R"({"type": "magic"})", "application/json")->status, 422);
    EXPECT_EQ(cli.Get("/class/missing.csv")->status, 404);
    EXPECT_EQ(cli.Get("/wordclouds?mode=frequency&class=iteration_3")->status, 404);
}

TEST_F(ServiceFixture, WordcloudsOnTopicRun)
{
    Running srv(topics_dir_->str());
    auto cli = srv.client();
    auto r = cli.Get("/wordclouds?mode=topic_weight&iteration=3&top_n=5");
    ASSERT_EQ(r->status, 200);
    const auto clouds = body(r);
    EXPECT_EQ(clouds.size(), 3u);
    EXPECT_LE(clouds[0]["entries"].size(), 5u);

    ASSERT_EQ(cli.Post("/class", R"({"type": "full", "iteration": "3"})", "application/json")->status, 200);
    r = cli.Get("/wordclouds?mode=frequency&class=iteration_3&top_n=4");
    ASSERT_EQ(r->status, 200);
    EXPECT_GE(body(r).size(), 1u);

    r = cli.Get("/wordclouds?mode=weight_difference&from=2.0&to=3.1");
    ASSERT_EQ(r->status, 200);
    EXPECT_EQ(cli.Get("/wordclouds?mode=other")->status, 422);
}

TEST(Service, RunStillComputingAnswers409)
{
    TempDir dir("svc-running");
    write_file(dir.str("manifest.json"), R"({"status": "running"})");
    Service service(dir.str());
    const int port = service.bind_any_port("127.0.0.1");
    std::thread t([&] { service.listen_after_bind(); });
    service.server().wait_until_ready();
    httplib::Client cli("127.0.0.1", port);
    auto r = cli.Get("/run");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 409);
    service.stop();
    t.join();
}

TEST(Session, ColorsStableAcrossMethodsAndThresholds)
{
    TempDir dir("session");
    persist_run(testing_support::run_config(testing_support::blobs_config(2, 6)), dir.str());
    RunSession s(load_run(dir.str()));
    const auto base = s.embedding("mds")["rows"];
    std::vector<std::string> first;
    for (const auto& row : base)
        first.push_back(row["color"].get<std::string>());
    for (int t = 2; t <= 4; ++t) {
        s.set_threshold(t);
        for (const char* m : {"mds", "tsne"}) {
            std::vector<std::string> now;
            const auto emb = s.embedding(m);
            for (const auto& row : emb["rows"])
                now.push_back(row["color"].get<std::string>());
            EXPECT_EQ(now, first) << m << " t=" << t;
        }
    }
    EXPECT_THROW(s.set_threshold(1), InvalidThreshold);
}

TEST(Session, ClassSpecsValidated)
{
    EXPECT_THROW(parse_class_spec(Json::array()), InvalidArgument);
    EXPECT_THROW(parse_class_spec(Json{{"type", "transition"}, {"from", "2"}}), InvalidArgument);
    const auto s = parse_class_spec(Json{{"type", "transition"}, {"from", "2"}, {"to", "3"}, {"group", 1}, {"direction", "to"}});
    EXPECT_EQ(s.direction, FlowDirection::to);
    EXPECT_EQ(class_id("transition_2.1_to_3 x/y"), "transition_2.1_to_3_x_y");
}
