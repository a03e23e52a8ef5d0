import { beforeEach, describe, expect, it } from "vitest";

import {
  ApiError,
  getJob,
  getScene,
  listJobs,
  postRating,
  submitArxiv,
  submitPdf,
  submitPrompt,
} from "../src/api.js";
import { makeJob, StubApi } from "./helpers.js";

let stub: StubApi;

beforeEach(() => {
  stub = new StubApi();
  stub.install();
});

describe("submission", () => {
  it("posts prompt as json to /jobs", async () => {
    stub.submitResponse = makeJob("j1");
    const job = await submitPrompt("Explain eigenvalues", "auto");
    expect(job.id).toBe("j1");
    expect(stub.submitBodies).toEqual([{ prompt: "Explain eigenvalues" }]);
  });

  it("review mode goes through the mode query parameter", async () => {
    stub.submitResponse = makeJob("j2", { mode: "review" });
    await submitArxiv("2107.03374", "review");
    expect(stub.submitBodies).toEqual([{ arxiv_id: "2107.03374" }]);
  });

  it("pdf uploads are multipart with a pdf field", async () => {
    stub.submitResponse = makeJob("j3", { input_kind: "pdf" });
    const file = new File([new Uint8Array([0x25, 0x50, 0x44, 0x46])], "paper.pdf", {
      type: "application/pdf",
    });
    await submitPdf(file, "auto");
    const body = stub.submitBodies[0] as FormData;
    expect(body).toBeInstanceOf(FormData);
    expect(body.get("pdf")).toBeInstanceOf(File);
  });
});

describe("error envelope", () => {
  it("non-2xx responses raise ApiError with code and detail", async () => {
    await expect(getJob("missing")).rejects.toMatchObject({
      status: 404,
      code: "JobNotFound",
    });
    const err = await getJob("missing").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.message).toBe("unknown job");
  });

  it("scene fetch before planning surfaces the conflict", async () => {
    stub.jobs.set("j1", makeJob("j1"));
    await expect(getScene("j1")).rejects.toMatchObject({ status: 409, code: "WrongState" });
  });
});

describe("listing and ratings", () => {
  it("listJobs unwraps the jobs array and passes the state filter", async () => {
    stub.jobs.set("a", makeJob("a", { state: "done" }));
    stub.jobs.set("b", makeJob("b", { state: "planning" }));
    const done = await listJobs("done");
    expect(done.map((j) => j.id)).toEqual(["a"]);
    const all = await listJobs();
    expect(all).toHaveLength(2);
  });

  it("postRating sends exactly five integers", async () => {
    stub.jobs.set("a", makeJob("a", { state: "done" }));
    await postRating("a", [5, 4, 3, 2, 1]);
    expect(stub.ratings).toEqual([{ job_id: "a", dims: [5, 4, 3, 2, 1] }]);
  });

  it("postRating refuses malformed payloads before any request", () => {
    expect(() => postRating("a", [1, 2, 3, 4])).toThrow();
    expect(() => postRating("a", [1, 2, 3, 4, 6])).toThrow();
    expect(() => postRating("a", [1, 2, 3, 4, 4.5])).toThrow();
    expect(stub.ratings).toEqual([]);
  });
});
