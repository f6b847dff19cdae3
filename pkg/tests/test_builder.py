import json
import logging
import math

import pytest

from semaug.augment import AugmentationConfig, StrategyKind
from semaug.builder import (
    AllJobsFailed,
    GenerationJob,
    ManifestEntry,
    MixManifest,
    NoCaptionsForImage,
    OutputNotWritable,
    RatioUnsatisfiable,
    build_augmented_dataset,
    missing_manifest_files,
    mix,
    plan_augmentation,
    stats,
)
from semaug.coco import (
    CaptionAnnotation,
    Category,
    Dataset,
    ImageRecord,
    parse_dataset,
    validate,
)
from semaug.generation import BackendConfig
from semaug.hashing import fnv1a64

from stub_server import StubBackend

CFG = AugmentationConfig()


def plan(dataset, table, ratio=1.0, seed=42, **kwargs):
    return plan_augmentation(dataset, CFG, ratio, seed, table, **kwargs)


class TestPlan:
    @pytest.mark.parametrize("ratio", [0.0, 0.25, 0.5, 1.0, 2.5])
    def test_job_count_is_floor_of_ratio(self, demo_dataset, table, ratio):
        jobs = plan(demo_dataset, table, ratio=ratio)
        assert len(jobs) == math.floor(ratio * len(demo_dataset.images))

    def test_zero_ratio_empty_plan(self, demo_dataset, table):
        assert plan(demo_dataset, table, ratio=0.0) == []

    def test_negative_ratio_rejected(self, demo_dataset, table):
        with pytest.raises(ValueError):
            plan(demo_dataset, table, ratio=-0.5)

    def test_deterministic(self, demo_dataset, table):
        assert plan(demo_dataset, table) == plan(demo_dataset, table)

    def test_seed_changes_plan(self, demo_dataset, table):
        a = plan(demo_dataset, table, seed=1)
        b = plan(demo_dataset, table, seed=2)
        assert [j.augmented.text for j in a] != [j.augmented.text for j in b]

    def test_cycles_images_in_ascending_id_order(self, demo_dataset, table):
        jobs = plan(demo_dataset, table, ratio=2.0)
        caption_to_image = {c.id: c.image_id for c in demo_dataset.captions}
        image_ids = [caption_to_image[j.augmented.source_caption_id] for j in jobs]
        ordered = sorted(i.id for i in demo_dataset.images)
        assert image_ids == ordered + ordered

    def test_request_seeds_derived_from_ordinal_and_run_seed(self, demo_dataset, table):
        jobs = plan(demo_dataset, table, seed=42)
        for ordinal, job in enumerate(jobs):
            assert job.request.seed == fnv1a64(f"{ordinal}:42".encode("utf-8"))

    def test_output_files_sequential(self, demo_dataset, table):
        jobs = plan(demo_dataset, table)
        assert [j.output_file for j in jobs] == [
            f"images/aug_{i:06d}.png" for i in range(len(jobs))
        ]

    def test_requested_dimensions_forwarded(self, demo_dataset, table):
        jobs = plan(demo_dataset, table, image_width=64, image_height=128)
        assert all(j.request.width == 64 and j.request.height == 128 for j in jobs)

    def test_repeated_visits_continue_caption_streams(self, demo_dataset, table):
        # at ratio 2 every image is visited twice; a caption drawn twice must
        # not produce two identical augmentations by construction
        jobs = plan(demo_dataset, table, ratio=2.0)
        by_caption = {}
        for job in jobs:
            by_caption.setdefault(job.augmented.source_caption_id, []).append(job.augmented)
        repeated = [v for v in by_caption.values() if len(v) > 1]
        assert repeated  # the demo dataset has 2 captions per image, so some repeat
        assert any(a.choice_trace != b.choice_trace or a.text != b.text for a, b, *_ in repeated)

    def test_image_without_captions_skipped(self, table, taxonomy, caplog):
        ds = Dataset(
            images=(
                ImageRecord(1, "a.png", 8, 8),
                ImageRecord(2, "b.png", 8, 8),
            ),
            captions=(CaptionAnnotation(1, 1, "a dog in the park"),),
            labels=(),
            taxonomy=taxonomy,
        )
        with caplog.at_level(logging.WARNING):
            jobs = plan_augmentation(ds, CFG, 1.0, 7, table)
        assert len(jobs) == 2  # backfilled from the captioned image
        assert all(j.augmented.source_caption_id == 1 for j in jobs)
        assert "no captions" in caplog.text

    def test_no_captions_at_all(self, table, taxonomy):
        ds = Dataset(
            images=(ImageRecord(1, "a.png", 8, 8),),
            captions=(),
            labels=(),
            taxonomy=taxonomy,
        )
        with pytest.raises(NoCaptionsForImage):
            plan_augmentation(ds, CFG, 1.0, 7, table)


class TestBuild:
    def test_writes_full_tree(self, demo_dataset, table, taxonomy, tmp_path):
        jobs = plan(demo_dataset, table, ratio=0.5)
        built = build_augmented_dataset(jobs, BackendConfig(), tmp_path, taxonomy, 20)
        assert len(built.images) == len(jobs)
        for job in jobs:
            assert (tmp_path / job.output_file).is_file()
        assert json.loads((tmp_path / "failures.json").read_text()) == []
        reparsed = parse_dataset((tmp_path / "annotations.json").read_bytes())
        assert reparsed == built
        assert validate(built).ok()

    def test_ids_start_above_base(self, demo_dataset, table, taxonomy, tmp_path):
        jobs = plan(demo_dataset, table, ratio=0.5)
        built = build_augmented_dataset(jobs, BackendConfig(), tmp_path, taxonomy, 100)
        assert [img.id for img in built.images] == [101 + i for i in range(len(jobs))]

    def test_provenance_extras_recorded(self, demo_dataset, table, taxonomy, tmp_path):
        jobs = plan(demo_dataset, table, ratio=0.5)
        built = build_augmented_dataset(jobs, BackendConfig(), tmp_path, taxonomy, 20)
        for job, cap in zip(jobs, built.captions):
            fields = dict(cap.extra)
            assert json.loads(fields["strategy"]) == job.augmented.strategy.value
            assert json.loads(fields["source_caption_id"]) == job.augmented.source_caption_id

    def test_labels_match_labels_after(self, demo_dataset, table, taxonomy, tmp_path):
        jobs = plan(demo_dataset, table, ratio=1.0)
        built = build_augmented_dataset(jobs, BackendConfig(), tmp_path, taxonomy, 20)
        for ordinal, job in enumerate(jobs):
            image_id = 20 + ordinal + 1
            got = {l.category_id for l in built.labels if l.image_id == image_id}
            assert got == set(job.augmented.labels_after)

    def test_empty_plan_builds_empty_dataset(self, taxonomy, tmp_path):
        built = build_augmented_dataset([], BackendConfig(), tmp_path, taxonomy, 0)
        assert built.images == ()
        assert (tmp_path / "failures.json").exists()

    def test_partial_failure_recorded_and_skipped(self, demo_dataset, table, taxonomy, tmp_path):
        jobs = plan(demo_dataset, table, ratio=0.25)[:5]
        poisoned = jobs[2].request.prompt
        with StubBackend(poison_prompts=(poisoned,)) as stub:
            cfg = BackendConfig(
                kind="remote", endpoint=stub.url, retries=1, backoff_base_ms=1
            )
            built = build_augmented_dataset(jobs, cfg, tmp_path, taxonomy, 20)
        assert len(built.images) == 4
        failures = json.loads((tmp_path / "failures.json").read_text())
        assert len(failures) == 1
        assert failures[0]["ordinal"] == 2
        assert failures[0]["prompt"] == poisoned
        assert failures[0]["error"] == "TransportFailed"
        # id gap where the failed job would have been
        assert [img.id for img in built.images] == [21, 22, 24, 25]
        assert not (tmp_path / jobs[2].output_file).exists()

    def test_all_jobs_failed_raises(self, demo_dataset, table, taxonomy, tmp_path):
        jobs = plan(demo_dataset, table, ratio=0.25)[:2]
        cfg = BackendConfig(kind="remote", endpoint="http://127.0.0.1:9", retries=0, backoff_base_ms=1)
        with pytest.raises(AllJobsFailed):
            build_augmented_dataset(jobs, cfg, tmp_path, taxonomy, 20)
        assert len(json.loads((tmp_path / "failures.json").read_text())) == 2

    def test_unwritable_output(self, demo_dataset, table, taxonomy, tmp_path):
        target = tmp_path / "blocked"
        target.write_text("a file, not a directory")
        jobs = plan(demo_dataset, table, ratio=0.25)[:1]
        with pytest.raises(OutputNotWritable):
            build_augmented_dataset(jobs, BackendConfig(), target, taxonomy, 20)


def build_pair(demo_dataset, table, taxonomy, tmp_path, ratio=1.0, seed=42):
    jobs = plan(demo_dataset, table, ratio=ratio, seed=seed)
    base = max(img.id for img in demo_dataset.images)
    built = build_augmented_dataset(jobs, BackendConfig(), tmp_path, taxonomy, base)
    return jobs, built


class TestMix:
    def test_entry_count(self, demo_dataset, table, taxonomy, tmp_path):
        _, built = build_pair(demo_dataset, table, taxonomy, tmp_path)
        manifest = mix(demo_dataset, built, 1.0, 42)
        assert len(manifest.entries) == 2 * len(demo_dataset.images)
        assert manifest.ratio == 1.0 and manifest.run_seed == 42

    def test_partial_ratio_takes_prefix_of_augmented(self, demo_dataset, table, taxonomy, tmp_path):
        _, built = build_pair(demo_dataset, table, taxonomy, tmp_path)
        manifest = mix(demo_dataset, built, 0.3, 42)
        augmented_files = {e.image_file for e in manifest.entries if e.source == "augmented"}
        want = {img.file_name for img in built.images[: math.floor(0.3 * 20)]}
        assert augmented_files == want

    def test_ratio_unsatisfiable(self, demo_dataset, table, taxonomy, tmp_path):
        _, built = build_pair(demo_dataset, table, taxonomy, tmp_path, ratio=0.5)
        with pytest.raises(RatioUnsatisfiable):
            mix(demo_dataset, built, 1.0, 42)

    def test_shuffle_deterministic_and_seed_sensitive(self, demo_dataset, table, taxonomy, tmp_path):
        _, built = build_pair(demo_dataset, table, taxonomy, tmp_path)
        a = mix(demo_dataset, built, 1.0, 42)
        b = mix(demo_dataset, built, 1.0, 42)
        c = mix(demo_dataset, built, 1.0, 43)
        assert a == b
        assert [e.image_file for e in a.entries] != [e.image_file for e in c.entries]

    def test_interleaved_not_concatenated(self, demo_dataset, table, taxonomy, tmp_path):
        _, built = build_pair(demo_dataset, table, taxonomy, tmp_path)
        manifest = mix(demo_dataset, built, 1.0, 42)
        sources = [e.source for e in manifest.entries]
        assert sources != sorted(sources) and sources != sorted(sources, reverse=True)

    def test_original_entries_carry_root_prefix(self, demo_dataset, table, taxonomy, tmp_path):
        _, built = build_pair(demo_dataset, table, taxonomy, tmp_path)
        manifest = mix(demo_dataset, built, 1.0, 42, original_images_root="../src")
        for entry in manifest.entries:
            if entry.source == "original":
                assert entry.image_file.startswith("../src/")
            else:
                assert entry.image_file.startswith("images/")

    def test_augmented_entries_have_provenance(self, demo_dataset, table, taxonomy, tmp_path):
        jobs, built = build_pair(demo_dataset, table, taxonomy, tmp_path)
        manifest = mix(demo_dataset, built, 1.0, 42)
        by_file = {j.output_file: j for j in jobs}
        for entry in manifest.entries:
            if entry.source == "augmented":
                job = by_file[entry.image_file]
                assert entry.strategy is job.augmented.strategy
                assert entry.source_caption_id == job.augmented.source_caption_id
                assert entry.labels == job.augmented.labels_after
            else:
                assert entry.strategy is None and entry.source_caption_id is None

    def test_original_labels_from_annotations(self, demo_dataset, table, taxonomy, tmp_path):
        _, built = build_pair(demo_dataset, table, taxonomy, tmp_path)
        manifest = mix(demo_dataset, built, 1.0, 42)
        by_file = {img.file_name: img.id for img in demo_dataset.images}
        for entry in manifest.entries:
            if entry.source == "original":
                image_id = by_file[entry.image_file]
                want = {l.category_id for l in demo_dataset.labels if l.image_id == image_id}
                assert entry.labels == frozenset(want)

    def test_json_round_trip(self, demo_dataset, table, taxonomy, tmp_path):
        _, built = build_pair(demo_dataset, table, taxonomy, tmp_path)
        manifest = mix(demo_dataset, built, 1.0, 42)
        assert MixManifest.from_json(manifest.to_json()) == manifest


class TestStats:
    def sample_manifest(self) -> MixManifest:
        entries = (
            ManifestEntry("o1.png", frozenset({1, 2}), "original"),
            ManifestEntry("o2.png", frozenset({1}), "original"),
            ManifestEntry("a1.png", frozenset({2, 3}), "augmented", StrategyKind.PREFIX, 10),
            ManifestEntry("a2.png", frozenset({3}), "augmented", StrategyKind.COMPOUND, 11),
        )
        return MixManifest(entries=entries, ratio=1.0, run_seed=5)

    def test_counts(self):
        report = stats(self.sample_manifest())
        assert report.total_entries == 4
        assert report.originals == 2
        assert report.augmented == 2
        assert report.by_strategy == {"prefix": 1, "compound": 1}

    def test_category_counts(self):
        report = stats(self.sample_manifest())
        assert report.category_counts_original == {1: 2, 2: 1}
        assert report.category_counts_mixed == {1: 2, 2: 2, 3: 2}

    def test_frequency_delta(self):
        report = stats(self.sample_manifest())
        assert report.label_freq_original[1] == pytest.approx(1.0)
        assert report.label_freq_mixed[1] == pytest.approx(0.5)
        assert report.label_freq_delta[1] == pytest.approx(-0.5)
        assert report.label_freq_delta[3] == pytest.approx(0.5)  # absent originally

    def test_recount_matches_emitted_files(self, demo_dataset, table, taxonomy, tmp_path):
        _, built = build_pair(demo_dataset, table, taxonomy, tmp_path)
        manifest = mix(demo_dataset, built, 1.0, 42)
        report = stats(manifest)
        pngs = list((tmp_path / "images").glob("aug_*.png"))
        assert report.augmented == len(pngs)
        assert sum(report.by_strategy.values()) == len(pngs)

    def test_to_dict_serializable(self):
        doc = stats(self.sample_manifest()).to_dict()
        json.dumps(doc)  # must not raise


class TestMissingFiles:
    def test_reports_relative_paths_not_on_disk(self, tmp_path):
        (tmp_path / "present.png").write_bytes(b"x")
        manifest = MixManifest(
            entries=(
                ManifestEntry("present.png", frozenset(), "original"),
                ManifestEntry("absent.png", frozenset(), "original"),
            ),
            ratio=0.0,
            run_seed=1,
        )
        assert missing_manifest_files(manifest, tmp_path) == ["absent.png"]

    def test_job_dataclass_frozen(self, demo_dataset, table):
        job = plan(demo_dataset, table, ratio=0.25)[0]
        assert isinstance(job, GenerationJob)
        with pytest.raises(AttributeError):
            job.output_file = "elsewhere.png"
