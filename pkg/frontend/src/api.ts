/**
 * Typed client for the study server. Every number the UI shows comes from
 * these responses; the client never computes kinematics, durations or
 * metric values itself.
 */

export interface ChainJoint {
  name: string;
  link_offset_mm: [number, number, number];
  rotation_axis: [number, number, number];
  min_deg: number;
  max_deg: number;
}

export interface Chain {
  schema: string;
  name: string;
  joints: ChainJoint[];
}

export interface KeyframeSummary {
  angles_deg: number[];
  hold_ms: number;
  transit_speed: string;
}

export interface ClipSummary {
  clip_id: string | null;
  keyframes: KeyframeSummary[];
  duration_ms: number;
}

export interface SessionState {
  session_id: string;
  participant_id: string;
  phase: "tutorial" | "record" | "rate" | "done";
  plan: string[];
  row_index: number;
  records: number;
  current_referent?: { id: string; prompt: string; kind: string };
  clip?: ClipSummary;
}

export interface PlaybackHandle {
  playback_id: string;
  frame_count: number;
  duration_ms: number;
}

export interface AssignmentInfo {
  participant_id: string;
  category_id: string;
  video_uri: string;
}

export interface ParticipantState {
  stage: "unassigned" | "video" | "interpretation" | "vas" | "done";
  category_id?: string;
  video_uri?: string;
  watch_count?: number;
  battery?: { text: string }[];
  attention_checks?: { position: number; text: string }[];
}

export interface ApiErrorBody {
  errors: { path: string; message: string }[];
}

export class ApiError extends Error {
  status: number;
  body: ApiErrorBody;

  constructor(status: number, body: ApiErrorBody) {
    super(body.errors?.[0]?.message ?? `HTTP ${status}`);
    this.status = status;
    this.body = body;
  }
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let parsed: ApiErrorBody = { errors: [{ path: "", message: response.statusText }] };
      try {
        parsed = (await response.json()) as ApiErrorBody;
      } catch {
        // keep the fallback body
      }
      throw new ApiError(response.status, parsed);
    }
    return (await response.json()) as T;
  }

  getChain(): Promise<Chain> {
    return this.request("GET", "/chain");
  }

  forwardKinematics(anglesDeg: number[]): Promise<{ links_mm: number[][] }> {
    return this.request("POST", "/chain/fk", { angles_deg: anglesDeg });
  }

  createSession(participantId: string): Promise<SessionState> {
    return this.request("POST", "/sessions", { participant_id: participantId });
  }

  getSession(sessionId: string): Promise<SessionState> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  saveKeyframe(
    sessionId: string,
    anglesDeg: number[],
    holdMs: number,
    transitSpeed: string,
  ): Promise<ClipSummary> {
    return this.request("POST", `/sessions/${sessionId}/keyframes`, {
      angles_deg: anglesDeg,
      hold_ms: holdMs,
      transit_speed: transitSpeed,
    });
  }

  undo(sessionId: string): Promise<ClipSummary> {
    return this.request("POST", `/sessions/${sessionId}/undo`, {});
  }

  setSpeed(sessionId: string, index: number, speed: string): Promise<ClipSummary> {
    return this.request("POST", `/sessions/${sessionId}/speed`, { index, speed });
  }

  advance(sessionId: string): Promise<SessionState> {
    return this.request("POST", `/sessions/${sessionId}/advance`, {});
  }

  play(sessionId: string): Promise<PlaybackHandle> {
    return this.request("POST", `/sessions/${sessionId}/play`, {});
  }

  submitRatings(sessionId: string, values: number[]): Promise<{ phase: string }> {
    return this.request("POST", `/sessions/${sessionId}/ratings`, { values });
  }

  streamUrl(playbackId: string): string {
    return `${this.baseUrl}/playback/${playbackId}/stream`;
  }

  assign(studyId: string, participantId: string): Promise<AssignmentInfo> {
    return this.request("POST", `/studies/${studyId}/assign`, {
      participant_id: participantId,
    });
  }

  reportWatched(studyId: string, participantId: string): Promise<{ watch_count: number }> {
    return this.request("POST", `/studies/${studyId}/responses/watched`, {
      participant_id: participantId,
    });
  }

  submitInterpretation(
    studyId: string,
    participantId: string,
    text: string,
  ): Promise<{ stage: string }> {
    return this.request("POST", `/studies/${studyId}/responses/interpretation`, {
      participant_id: participantId,
      text,
    });
  }

  submitVas(
    studyId: string,
    participantId: string,
    values: number[],
    attentionAnswers: number[],
    untouched: boolean[] = [],
  ): Promise<{ stage: string }> {
    return this.request("POST", `/studies/${studyId}/responses/vas`, {
      participant_id: participantId,
      values,
      attention_answers: attentionAnswers,
      untouched,
    });
  }

  participantState(studyId: string, participantId: string): Promise<ParticipantState> {
    return this.request("GET", `/studies/${studyId}/participants/${participantId}`);
  }
}
