/**
 * Conductor's elicitation workspace: the current referent prompt, joint
 * sliders for a candidate pose, the keyframe list with per-segment speed
 * selectors, undo, preview, and the rating form once the session reaches
 * the rating phase. Server 4xx responses surface inline next to the control
 * that caused them; the keyframe list is only ever replaced by server state.
 */

import { ApiClient, ApiError, Chain, ClipSummary, SessionState } from "./api.js";
import { ArmView } from "./armview.js";
import { readFrameStream } from "./stream.js";
import { createVasSlider, VasSlider } from "./slider.js";

const RATING_QUESTIONS = [
  "engaged",
  "attentive",
  "explorative",
  "information seeking",
  "curious",
];

export class WorkspaceController {
  state: SessionState;
  /** frames drawn during the most recent preview */
  lastPreviewFrames = 0;
  private jointInputs: HTMLInputElement[] = [];
  private ratingSliders: VasSlider[] = [];
  private armView: ArmView | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly chain: Chain,
    state: SessionState,
    readonly root: HTMLElement,
  ) {
    this.state = state;
  }

  static async start(
    api: ApiClient,
    participantId: string,
    root: HTMLElement,
  ): Promise<WorkspaceController> {
    const chain = await api.getChain();
    const state = await api.createSession(participantId);
    const controller = new WorkspaceController(api, chain, state, root);
    controller.render();
    await controller.refreshCandidatePose();
    return controller;
  }

  get sessionId(): string {
    return this.state.session_id;
  }

  render(): void {
    this.root.textContent = "";
    const heading = document.createElement("h2");
    heading.id = "phase-heading";
    heading.textContent = `Phase: ${this.state.phase}`;
    this.root.appendChild(heading);

    if (this.state.current_referent) {
      const prompt = document.createElement("p");
      prompt.id = "referent-prompt";
      prompt.textContent =
        `${this.state.current_referent.id}: ${this.state.current_referent.prompt}`;
      this.root.appendChild(prompt);
    }

    const viewports = document.createElement("div");
    viewports.id = "armview";
    this.root.appendChild(viewports);
    this.armView = new ArmView(viewports);

    if (this.state.phase === "tutorial" || this.state.phase === "record") {
      this.renderRecordingControls();
    } else if (this.state.phase === "rate") {
      this.renderRatingForm();
    } else {
      const done = document.createElement("p");
      done.textContent = "Session complete.";
      this.root.appendChild(done);
    }
  }

  private inlineError(parent: HTMLElement, id: string): HTMLElement {
    const box = document.createElement("p");
    box.className = "inline-error";
    box.id = id;
    box.setAttribute("role", "alert");
    box.hidden = true;
    parent.appendChild(box);
    return box;
  }

  private report(box: HTMLElement, err: unknown): void {
    box.hidden = false;
    box.textContent =
      err instanceof ApiError ? err.message : "request failed, try again";
  }

  private renderRecordingControls(): void {
    const section = document.createElement("section");
    section.className = "recording";

    const sliderBlock = document.createElement("div");
    sliderBlock.id = "joint-sliders";
    this.jointInputs = this.chain.joints.map((joint) => {
      const row = document.createElement("label");
      row.textContent = joint.name;
      const input = document.createElement("input");
      input.type = "range";
      input.min = String(joint.min_deg);
      input.max = String(joint.max_deg);
      input.step = "1";
      input.value = "0";
      input.dataset.joint = joint.name;
      input.addEventListener("input", () => {
        void this.refreshCandidatePose();
      });
      row.appendChild(input);
      sliderBlock.appendChild(row);
      return input;
    });
    section.appendChild(sliderBlock);

    const saveButton = document.createElement("button");
    saveButton.id = "save-keyframe";
    saveButton.textContent = "Save keyframe";
    const saveError = this.inlineError(section, "save-error");
    saveButton.addEventListener("click", () => {
      void (async () => {
        try {
          const clip = await this.api.saveKeyframe(
            this.sessionId,
            this.candidateAngles(),
            Number(holdInput.value) || 0,
            speedSelect.value,
          );
          this.applyClip(clip);
        } catch (err) {
          this.report(saveError, err);
        }
      })();
    });

    const holdInput = document.createElement("input");
    holdInput.id = "hold-ms";
    holdInput.type = "number";
    holdInput.min = "0";
    holdInput.value = "0";

    const speedSelect = document.createElement("select");
    speedSelect.id = "new-keyframe-speed";
    for (const speed of ["slow", "normal", "fast"]) {
      const option = document.createElement("option");
      option.value = speed;
      option.textContent = speed;
      if (speed === "normal") option.selected = true;
      speedSelect.appendChild(option);
    }

    const undoButton = document.createElement("button");
    undoButton.id = "undo-button";
    undoButton.textContent = "Undo";
    const undoError = this.inlineError(section, "undo-error");
    undoButton.addEventListener("click", () => {
      void (async () => {
        try {
          const clip = await this.api.undo(this.sessionId);
          this.applyClip(clip);
        } catch (err) {
          this.report(undoError, err);
        }
      })();
    });

    const previewButton = document.createElement("button");
    previewButton.id = "preview-button";
    previewButton.textContent = "Preview";
    const previewError = this.inlineError(section, "preview-error");
    previewButton.addEventListener("click", () => {
      void (async () => {
        try {
          await this.preview();
        } catch (err) {
          this.report(previewError, err);
        }
      })();
    });

    const advanceButton = document.createElement("button");
    advanceButton.id = "advance-button";
    advanceButton.textContent = "Next referent";
    const advanceError = this.inlineError(section, "advance-error");
    advanceButton.addEventListener("click", () => {
      void (async () => {
        try {
          this.state = await this.api.advance(this.sessionId);
          this.render();
        } catch (err) {
          this.report(advanceError, err);
        }
      })();
    });

    section.appendChild(holdInput);
    section.appendChild(speedSelect);
    section.appendChild(saveButton);
    section.appendChild(undoButton);
    section.appendChild(previewButton);
    section.appendChild(advanceButton);

    const list = document.createElement("ol");
    list.id = "keyframe-list";
    section.appendChild(list);
    this.root.appendChild(section);
    this.renderKeyframeList();
  }

  candidateAngles(): number[] {
    return this.jointInputs.map((input) => Number(input.value));
  }

  private applyClip(clip: ClipSummary): void {
    if (this.state.clip) {
      this.state.clip = clip;
    }
    this.state = { ...this.state, clip };
    this.renderKeyframeList();
  }

  renderKeyframeList(): void {
    const list = this.root.querySelector("#keyframe-list");
    if (!list) return;
    list.textContent = "";
    const clip = this.state.clip;
    if (!clip || clip.keyframes.length === 0) {
      const empty = document.createElement("li");
      empty.className = "empty";
      empty.textContent = "no keyframes yet";
      list.appendChild(empty);
      return;
    }
    clip.keyframes.forEach((keyframe, index) => {
      const item = document.createElement("li");
      const label = document.createElement("span");
      label.textContent =
        `#${index} [${keyframe.angles_deg.map((a) => a.toFixed(0)).join(", ")}] ` +
        `hold ${keyframe.hold_ms} ms`;
      const speedSelect = document.createElement("select");
      speedSelect.className = "segment-speed";
      speedSelect.dataset.index = String(index);
      for (const speed of ["slow", "normal", "fast"]) {
        const option = document.createElement("option");
        option.value = speed;
        option.textContent = speed;
        if (speed === keyframe.transit_speed) option.selected = true;
        speedSelect.appendChild(option);
      }
      const speedError = document.createElement("span");
      speedError.className = "inline-error";
      speedError.hidden = true;
      speedSelect.addEventListener("change", () => {
        void (async () => {
          try {
            const clipNow = await this.api.setSpeed(
              this.sessionId,
              index,
              speedSelect.value,
            );
            this.applyClip(clipNow);
          } catch (err) {
            speedError.hidden = false;
            speedError.textContent =
              err instanceof ApiError ? err.message : "failed";
          }
        })();
      });
      item.appendChild(label);
      item.appendChild(speedSelect);
      item.appendChild(speedError);
      list.appendChild(item);
    });
    const durationNote = document.createElement("li");
    durationNote.className = "duration-note";
    durationNote.textContent = `duration ${clip.duration_ms} ms (server)`;
    list.appendChild(durationNote);
  }

  /** Render the slider pose through the server's FK endpoint. */
  async refreshCandidatePose(): Promise<void> {
    if (!this.armView || this.jointInputs.length === 0) return;
    const { links_mm } = await this.api.forwardKinematics(this.candidateAngles());
    this.armView.render(links_mm);
  }

  /** Stream the recorded clip and animate the arm; returns frames drawn. */
  async preview(): Promise<number> {
    const handle = await this.api.play(this.sessionId);
    let drawn = 0;
    const frames = await readFrameStream(
      this.api.streamUrl(handle.playback_id),
      (frame) => {
        drawn += 1;
        this.armView?.render(frame.links_mm);
      },
    );
    this.lastPreviewFrames = drawn;
    if (frames !== handle.frame_count) {
      throw new Error(
        `stream delivered ${frames} frames, server promised ${handle.frame_count}`,
      );
    }
    return drawn;
  }

  private renderRatingForm(): void {
    const section = document.createElement("section");
    section.className = "rating";
    const note = document.createElement("p");
    note.id = "rating-note";
    note.textContent =
      "Watch the playback, then rate it. Clips arrive in the order the " +
      "server chose.";
    section.appendChild(note);

    const previewButton = document.createElement("button");
    previewButton.id = "preview-button";
    previewButton.textContent = "Play clip";
    const previewError = this.inlineError(section, "preview-error");
    previewButton.addEventListener("click", () => {
      void (async () => {
        try {
          await this.preview();
        } catch (err) {
          this.report(previewError, err);
        }
      })();
    });
    section.appendChild(previewButton);

    this.ratingSliders = RATING_QUESTIONS.map((question) => {
      const slider = createVasSlider(
        `I perceived the system to be very ${question}.`,
      );
      section.appendChild(slider.root);
      return slider;
    });

    const submit = document.createElement("button");
    submit.id = "ratings-submit";
    submit.textContent = "Submit ratings";
    const ratingError = this.inlineError(section, "rating-error");
    submit.addEventListener("click", () => {
      void (async () => {
        try {
          await this.api.submitRatings(
            this.sessionId,
            this.ratingSliders.map((s) => s.value()),
          );
          this.state = await this.api.getSession(this.sessionId);
          this.render();
        } catch (err) {
          this.report(ratingError, err);
        }
      })();
    });
    section.appendChild(submit);
    this.root.appendChild(section);
  }
}
