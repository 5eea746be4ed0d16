"""Assignment balance, response gating, exclusions, and concurrency safety."""

import random
import threading

import pytest

from expressforge.verification import (
    AlreadyAssignedError,
    AttentionCheck,
    BatteryItem,
    ExpressionVideo,
    GatingError,
    QuotaFullError,
    StudyConfig,
    VerificationError,
    VerificationStudy,
    apply_exclusions,
    response_from_dict,
    response_to_dict,
    responses_from_dict,
    responses_to_dict,
    reverse_transform,
    study_config_from_dict,
    study_config_to_dict,
)

BATTERY = tuple(
    BatteryItem(f"item-{i}", reverse_scored=i in (7, 9)) for i in range(10)
)


def make_config(n_expressions=13, quota=20, checks=()):
    return StudyConfig(
        study_id="verify-1",
        expressions=tuple(
            ExpressionVideo(f"E{i + 1:02d}", f"videos/E{i + 1:02d}.mp4")
            for i in range(n_expressions)
        ),
        quota_per_expression=quota,
        battery=BATTERY,
        attention_checks=tuple(checks),
    )


def finish(study, pid, vas=None):
    study.record_video_ended(pid)
    study.submit_interpretation(pid, "it looks curious")
    return study.submit_vas(pid, vas or [50] * 10)


class TestAssignment:
    def test_first_assignment_is_lowest_id(self):
        study = VerificationStudy(make_config())
        assert study.assign("v1").category_id == "E01"

    def test_thirteen_assignments_cover_all_expressions(self):
        study = VerificationStudy(make_config())
        got = [study.assign(f"v{i}").category_id for i in range(13)]
        assert sorted(got) == [f"E{i + 1:02d}" for i in range(13)]

    def test_quota_full_raises(self):
        study = VerificationStudy(make_config(n_expressions=2, quota=3))
        for i in range(6):
            study.assign(f"v{i}")
        with pytest.raises(QuotaFullError):
            study.assign("late")

    def test_double_assignment_rejected(self):
        study = VerificationStudy(make_config())
        study.assign("v1")
        with pytest.raises(AlreadyAssignedError):
            study.assign("v1")

    def test_balance_never_exceeds_one(self):
        study = VerificationStudy(make_config(n_expressions=5, quota=50))
        for i in range(123):
            study.assign(f"v{i}")
            counts = study.assignment_counts().values()
            assert max(counts) - min(counts) <= 1

    def test_concurrent_assigns_respect_quota_and_balance(self):
        study = VerificationStudy(make_config(n_expressions=13, quota=20))
        errors = []

        def worker(pid):
            try:
                study.assign(pid)
            except Exception as exc:  # pragma: no cover - failure channel
                errors.append(exc)

        threads = [
            threading.Thread(target=worker, args=(f"v{i}",)) for i in range(100)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        counts = study.assignment_counts()
        assert sum(counts.values()) == 100
        assert all(c <= 20 for c in counts.values())
        assert max(counts.values()) - min(counts.values()) <= 1


class TestGating:
    def test_interpretation_requires_video(self):
        study = VerificationStudy(make_config())
        study.assign("v1")
        with pytest.raises(GatingError, match="video"):
            study.submit_interpretation("v1", "curious")

    def test_vas_requires_interpretation(self):
        study = VerificationStudy(make_config())
        study.assign("v1")
        study.record_video_ended("v1")
        with pytest.raises(GatingError, match="interpretation"):
            study.submit_vas("v1", [50] * 10)

    def test_interpretation_sealed_once(self):
        study = VerificationStudy(make_config())
        study.assign("v1")
        study.record_video_ended("v1")
        study.submit_interpretation("v1", "curious")
        with pytest.raises(GatingError, match="sealed"):
            study.submit_interpretation("v1", "changed my mind")

    def test_empty_interpretation_rejected(self):
        study = VerificationStudy(make_config())
        study.assign("v1")
        study.record_video_ended("v1")
        with pytest.raises(VerificationError, match="empty"):
            study.submit_interpretation("v1", "   ")

    def test_vas_arity_and_range(self):
        study = VerificationStudy(make_config())
        study.assign("v1")
        study.record_video_ended("v1")
        study.submit_interpretation("v1", "curious")
        with pytest.raises(VerificationError, match="expected 10"):
            study.submit_vas("v1", [50] * 9)
        with pytest.raises(VerificationError, match="range"):
            study.submit_vas("v1", [50] * 9 + [101])

    def test_timestamps_strictly_ordered(self):
        study = VerificationStudy(make_config())
        study.assign("v1")
        response = finish(study, "v1")
        assert (
            response.video_completed_at
            < response.interpretation_sealed_at
            < response.vas_submitted_at
        )

    def test_rewatch_allowed_at_any_stage(self):
        study = VerificationStudy(make_config())
        study.assign("v1")
        study.record_video_ended("v1")
        study.submit_interpretation("v1", "curious")
        study.record_video_ended("v1")
        study.submit_vas("v1", [50] * 10)
        assert study.record_video_ended("v1") == 3

    def test_stage_progression(self):
        study = VerificationStudy(make_config())
        assert study.stage("v1") == "unassigned"
        study.assign("v1")
        assert study.stage("v1") == "video"
        study.record_video_ended("v1")
        assert study.stage("v1") == "interpretation"
        study.submit_interpretation("v1", "curious")
        assert study.stage("v1") == "vas"
        study.submit_vas("v1", [50] * 10)
        assert study.stage("v1") == "done"

    def test_adversarial_orderings_never_leak_vas(self):
        # every ordering of (interpretation, vas) attempts around a single
        # watched event: vas must fail unless an interpretation was sealed
        # strictly before it
        rng = random.Random(83)
        for trial in range(500):
            study = VerificationStudy(make_config(n_expressions=1, quota=1))
            study.assign("v1")
            actions = ["watch", "interpret", "vas"]
            rng.shuffle(actions)
            sealed = False
            watched = False
            for action in actions:
                if action == "watch":
                    study.record_video_ended("v1")
                    watched = True
                elif action == "interpret":
                    try:
                        study.submit_interpretation("v1", "curious")
                        assert watched
                        sealed = True
                    except GatingError:
                        assert not watched
                else:
                    try:
                        study.submit_vas("v1", [50] * 10)
                        assert sealed
                    except GatingError:
                        assert not sealed


class TestExclusions:
    def test_attention_failure_excluded(self):
        checks = (AttentionCheck(position=5, min_value=0, max_value=10),)
        study = VerificationStudy(make_config(checks=checks))
        study.assign("v1")
        study.record_video_ended("v1")
        study.submit_interpretation("v1", "curious")
        study.submit_vas("v1", [50] * 10, attention_answers=[90])
        report = apply_exclusions(study.responses(), checks)
        assert report.kept == ()
        assert report.excluded[0][1] == "attention"

    def test_movement_only_flag_excluded(self):
        study = VerificationStudy(make_config())
        study.assign("v1")
        finish(study, "v1")
        study.flag_movement_only("v1")
        report = apply_exclusions(study.responses())
        assert report.excluded[0][1] == "movement-only"

    def test_clean_response_kept(self):
        study = VerificationStudy(make_config())
        study.assign("v1")
        finish(study, "v1")
        report = apply_exclusions(study.responses())
        assert len(report.kept) == 1 and report.excluded == ()

    def test_partition_is_exact(self):
        checks = (AttentionCheck(position=5, min_value=0, max_value=10),)
        study = VerificationStudy(make_config(checks=checks))
        rng = random.Random(89)
        for i in range(30):
            pid = f"v{i}"
            study.assign(pid)
            study.record_video_ended(pid)
            study.submit_interpretation(pid, "something")
            study.submit_vas(
                pid, [50] * 10, attention_answers=[rng.choice([5, 95])]
            )
            if rng.random() < 0.3:
                study.flag_movement_only(pid)
        responses = study.responses()
        report = apply_exclusions(responses, checks)
        kept_ids = {r.participant_id for r in report.kept}
        excluded_ids = {r.participant_id for r, _ in report.excluded}
        assert kept_ids | excluded_ids == {r.participant_id for r in responses}
        assert kept_ids & excluded_ids == set()


class TestReverseTransform:
    def test_midpoint_is_fixed(self):
        assert reverse_transform(BATTERY, (50,) * 10) == (50,) * 10

    def test_reversed_item(self):
        raw = [0] * 10
        raw[7] = 80
        assert reverse_transform(BATTERY, raw)[7] == 20

    def test_involution(self):
        rng = random.Random(97)
        raw = tuple(rng.randint(0, 100) for _ in range(10))
        assert reverse_transform(BATTERY, reverse_transform(BATTERY, raw)) == raw


class TestSerialization:
    def test_response_round_trip(self):
        study = VerificationStudy(make_config())
        study.assign("v1")
        response = finish(study, "v1", vas=[1, 2, 3, 4, 5, 6, 7, 8, 9, 10])
        assert response_from_dict(response_to_dict(response)) == response

    def test_responses_doc_round_trip(self):
        study = VerificationStudy(make_config())
        for i in range(3):
            study.assign(f"v{i}")
            finish(study, f"v{i}")
        doc = responses_to_dict("verify-1", study.responses(), [("vx", "attention")])
        assert doc["schema"] == "responses/1"
        study_id, responses, exclusions = responses_from_dict(doc)
        assert study_id == "verify-1"
        assert responses == study.responses()
        assert exclusions == [("vx", "attention")]

    def test_study_config_round_trip(self):
        config = make_config(checks=(AttentionCheck(3, 0, 10),))
        assert study_config_from_dict(study_config_to_dict(config)) == config

    def test_untouched_flags_persist(self):
        study = VerificationStudy(make_config())
        study.assign("v1")
        study.record_video_ended("v1")
        study.submit_interpretation("v1", "curious")
        flags = (True,) + (False,) * 9
        response = study.submit_vas("v1", [50] * 10, untouched=flags)
        assert response.vas_untouched == flags
        assert response_from_dict(response_to_dict(response)) == response

    def test_untouched_arity_checked(self):
        study = VerificationStudy(make_config())
        study.assign("v1")
        study.record_video_ended("v1")
        study.submit_interpretation("v1", "curious")
        with pytest.raises(VerificationError, match="untouched"):
            study.submit_vas("v1", [50] * 10, untouched=[True])

    def test_duplicate_battery_rejected(self):
        with pytest.raises(VerificationError, match="unique"):
            StudyConfig(
                study_id="s",
                expressions=(ExpressionVideo("E01", "x.mp4"),),
                quota_per_expression=1,
                battery=(BatteryItem("same"), BatteryItem("same")),
            )
