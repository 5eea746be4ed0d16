/**
 * Participant-facing verification survey. Stages move strictly forward
 * (video -> interpretation -> vas -> done) except that the video may be
 * re-watched at any time; the sliders are unreachable until the
 * interpretation is sealed. The server enforces the same gating, and a
 * reload restores whatever stage the server has recorded.
 */

import { ApiClient, ApiError, ParticipantState } from "./api.js";
import { createVasSlider, VasSlider } from "./slider.js";

export type SurveyStage = "video" | "interpretation" | "vas" | "done";

const FORWARD: Record<SurveyStage, SurveyStage> = {
  video: "interpretation",
  interpretation: "vas",
  vas: "done",
  done: "done",
};

/** Client-side stage machine mirroring the server's gating rules. */
export class SurveyMachine {
  stage: SurveyStage;
  watchCount: number;

  constructor(stage: SurveyStage = "video", watchCount = 0) {
    this.stage = stage;
    this.watchCount = watchCount;
  }

  /** The video finished; re-watching is allowed and counted at any stage. */
  videoEnded(): void {
    this.watchCount += 1;
  }

  canContinuePastVideo(): boolean {
    return this.watchCount >= 1;
  }

  continueToInterpretation(): void {
    if (this.stage !== "video") {
      throw new Error(`cannot continue from stage '${this.stage}'`);
    }
    if (!this.canContinuePastVideo()) {
      throw new Error("the video must end before the survey continues");
    }
    this.stage = FORWARD.video;
  }

  sealInterpretation(): void {
    if (this.stage !== "interpretation") {
      throw new Error(`interpretation not allowed in stage '${this.stage}'`);
    }
    this.stage = FORWARD.interpretation;
  }

  submitVas(): void {
    if (this.stage !== "vas") {
      throw new Error(`sliders not allowed in stage '${this.stage}'`);
    }
    this.stage = FORWARD.vas;
  }
}

export class SurveyController {
  readonly machine: SurveyMachine;
  private sliders: VasSlider[] = [];
  private attentionSliders = new Map<number, VasSlider>();

  constructor(
    private readonly api: ApiClient,
    private readonly studyId: string,
    private readonly participantId: string,
    readonly root: HTMLElement,
    private readonly state: ParticipantState,
  ) {
    const stage = state.stage === "unassigned" ? "video" : state.stage;
    this.machine = new SurveyMachine(stage as SurveyStage, state.watch_count ?? 0);
  }

  /** Fetch server-side stage (assigning if needed) and build the page. */
  static async start(
    api: ApiClient,
    studyId: string,
    participantId: string,
    root: HTMLElement,
  ): Promise<SurveyController> {
    let state = await api.participantState(studyId, participantId);
    if (state.stage === "unassigned") {
      await api.assign(studyId, participantId);
      state = await api.participantState(studyId, participantId);
    }
    const controller = new SurveyController(api, studyId, participantId, root, state);
    controller.render();
    return controller;
  }

  render(): void {
    this.root.textContent = "";
    switch (this.machine.stage) {
      case "video":
        this.renderVideo();
        break;
      case "interpretation":
        this.renderVideo();
        this.renderInterpretation();
        break;
      case "vas":
        this.renderVideo();
        this.renderVas();
        break;
      case "done":
        this.renderDone();
        break;
    }
  }

  private errorBox(parent: HTMLElement): HTMLElement {
    const box = document.createElement("p");
    box.className = "inline-error";
    box.setAttribute("role", "alert");
    box.hidden = true;
    parent.appendChild(box);
    return box;
  }

  private showError(box: HTMLElement, err: unknown): void {
    box.hidden = false;
    box.textContent =
      err instanceof ApiError ? err.message : "request failed, try again";
  }

  private renderVideo(): void {
    const section = document.createElement("section");
    section.className = "survey-video";

    const video = document.createElement("video");
    video.id = "expression-video";
    video.setAttribute("src", this.state.video_uri ?? "");
    video.setAttribute("controls", "");
    section.appendChild(video);

    const errors = this.errorBox(section);

    // re-watching is allowed (and counted) at every stage; the continue
    // control exists only while the first viewing gates the survey
    let continueButton: HTMLButtonElement | null = null;
    if (this.machine.stage === "video") {
      continueButton = document.createElement("button");
      continueButton.id = "continue-button";
      continueButton.textContent = "Continue";
      continueButton.disabled = !this.machine.canContinuePastVideo();
      continueButton.addEventListener("click", () => {
        try {
          this.machine.continueToInterpretation();
          this.render();
        } catch (err) {
          this.showError(errors, err);
        }
      });
      section.appendChild(continueButton);
    }

    video.addEventListener("ended", () => {
      void (async () => {
        try {
          await this.api.reportWatched(this.studyId, this.participantId);
          this.machine.videoEnded();
          if (continueButton) continueButton.disabled = false;
        } catch (err) {
          this.showError(errors, err);
        }
      })();
    });

    this.root.appendChild(section);
  }

  private renderInterpretation(): void {
    const section = document.createElement("section");
    section.className = "survey-interpretation";

    const prompt = document.createElement("p");
    prompt.textContent =
      "In your own words, what did the robot express? Describe the meaning, " +
      "not the movement.";

    const textarea = document.createElement("textarea");
    textarea.id = "interpretation-text";

    const submit = document.createElement("button");
    submit.id = "interpretation-submit";
    submit.textContent = "Submit interpretation";

    const errors = this.errorBox(section);

    submit.addEventListener("click", () => {
      void (async () => {
        try {
          await this.api.submitInterpretation(
            this.studyId,
            this.participantId,
            textarea.value,
          );
          this.machine.sealInterpretation();
          this.render();
        } catch (err) {
          this.showError(errors, err);
        }
      })();
    });

    section.appendChild(prompt);
    section.appendChild(textarea);
    section.appendChild(submit);
    this.root.appendChild(section);
  }

  private renderVas(): void {
    const section = document.createElement("section");
    section.className = "survey-vas";
    this.sliders = [];
    this.attentionSliders = new Map();

    const battery = this.state.battery ?? [];
    const checks = new Map(
      (this.state.attention_checks ?? []).map((c) => [c.position, c.text]),
    );

    let batteryIndex = 0;
    const total = battery.length + checks.size;
    for (let position = 0; position < total; position += 1) {
      if (checks.has(position)) {
        const slider = createVasSlider(checks.get(position)!);
        slider.root.classList.add("attention-check");
        this.attentionSliders.set(position, slider);
        section.appendChild(slider.root);
      } else {
        const item = battery[batteryIndex];
        batteryIndex += 1;
        const slider = createVasSlider(
          `I perceived the movement to be very ${item.text}.`,
        );
        this.sliders.push(slider);
        section.appendChild(slider.root);
      }
    }

    const submit = document.createElement("button");
    submit.id = "vas-submit";
    submit.textContent = "Submit ratings";
    const errors = this.errorBox(section);

    submit.addEventListener("click", () => {
      void (async () => {
        try {
          await this.api.submitVas(
            this.studyId,
            this.participantId,
            this.sliders.map((s) => s.value()),
            [...this.attentionSliders.values()].map((s) => s.value()),
            this.sliders.map((s) => !s.touched()),
          );
          this.machine.submitVas();
          this.render();
        } catch (err) {
          this.showError(errors, err);
        }
      })();
    });

    section.appendChild(submit);
    this.root.appendChild(section);
  }

  private renderDone(): void {
    const section = document.createElement("section");
    section.className = "survey-done";
    const message = document.createElement("p");
    message.textContent = "All done. Thank you for taking part!";
    section.appendChild(message);
    this.root.appendChild(section);
  }
}
