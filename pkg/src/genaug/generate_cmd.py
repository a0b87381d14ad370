"""Implementation of the `generate` subcommand.

Builds generation requests from a source manifest (annotation plots or
edge maps as conditioning), runs them against a remote or in-process mock
service, and writes the generated-records manifest plus a replay log.
"""

from __future__ import annotations

from contextlib import ExitStack

from genaug import pipeline
from genaug.errors import ValidationError
from genaug.manifest import (
    DatasetManifest,
    DomainTag,
    compose_prompt,
    load_manifest,
    load_prompt_config,
    save_manifest,
)


def run_generate(manifest_path: str, prompts_path: str, out_dir: str,
                 out_manifest: str, service_url: str | None, mock_mode: str | None,
                 count: int | None, conditioning: str, target_domain: str | None,
                 log_path: str | None, seed: int) -> tuple[int, int]:
    if (service_url is None) == (mock_mode is None):
        raise ValidationError("pass exactly one of --service or --mock")
    m = load_manifest(manifest_path, require_canonical_size=False)
    prompts = load_prompt_config(prompts_path)

    sources = [rec for rec in m.records if rec.annotations] \
        if conditioning == "plot" else list(m.records)
    if not sources:
        raise ValidationError("no usable source records in the manifest "
                              f"for conditioning={conditioning!r}")

    domain_by_name = {d.name: d for d in m.domains}

    def domain_tag(rec) -> DomainTag:
        name = target_domain or rec.domain
        return domain_by_name.get(name, DomainTag(name=name, prompt_key=name))

    requests = []
    total = count if count is not None else len(sources)
    for i in range(total):
        rec = sources[i % len(sources)]
        tag = domain_tag(rec)
        img = _conditioning_image(rec, conditioning)
        requests.append(pipeline.GenerationRequest(
            conditioning=img,
            prompt=compose_prompt(prompts, tag),
            seed=seed + i,
            source_annotations=rec.annotations,
            source_id=rec.id,
        ))

    with ExitStack() as stack:
        if mock_mode is not None:
            from genaug.genservice import ServiceThread, make_generation_app

            service = stack.enter_context(ServiceThread(make_generation_app(mock_mode)))
            base_url = service.base_url
        else:
            base_url = service_url
        client = pipeline.GenerationClient(base_url)
        gen_domain = target_domain or sources[0].domain
        outcomes = pipeline.generate_records(client, requests, out_dir,
                                             domain=gen_domain, log_path=log_path)

    domains = m.domains
    if gen_domain not in domain_by_name:
        domains = domains + (DomainTag(name=gen_domain, prompt_key=gen_domain),)
    out = pipeline.outcomes_to_manifest(outcomes,
                                        DatasetManifest(domains=domains))
    save_manifest(out, out_manifest)
    n_ok = sum(1 for o in outcomes if o.record is not None)
    return n_ok, len(outcomes) - n_ok


def _conditioning_image(rec, conditioning: str):
    from genaug.raster import read_png, render_annotation_plot

    if conditioning == "plot":
        return render_annotation_plot(rec.annotations, rec.width, rec.height)
    from genaug.edge import canny, default_presets

    img = read_png(rec.path)
    return canny(img, default_presets()[0])
