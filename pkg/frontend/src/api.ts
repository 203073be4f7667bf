/**
 * Typed HTTP client for the session service.
 *
 * Enforces the service's concurrency model on the client side: one in-flight
 * request per session, rejected synchronously rather than queued so the UI
 * can keep its submit controls disabled until the previous response lands.
 */

import type { AnnotationPayload } from './payload.js';
import type {
  AnnotationResponse,
  CosegResponse,
  CosegScribble,
  CreateSessionRequest,
  SessionView,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = 'ApiError';
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private inFlight = new Set<string>();

  constructor(
    readonly base: string,
    private fetchFn: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  async createSession(req: CreateSessionRequest): Promise<string> {
    const out = await this.post<{ id: string }>('/sessions', req);
    return out.id;
  }

  /** Rejects immediately if this session already has a request in flight. */
  annotate(sessionId: string, payload: AnnotationPayload): Promise<AnnotationResponse> {
    return this.exclusive(sessionId, () =>
      this.post<AnnotationResponse>(`/sessions/${sessionId}/annotations`, payload),
    );
  }

  /** Empty scribble list runs the unsupervised mode. */
  coseg(sessionId: string, scribbles: CosegScribble[]): Promise<CosegResponse> {
    const body = scribbles.length > 0 ? { scribbles } : {};
    return this.exclusive(sessionId, () =>
      this.post<CosegResponse>(`/sessions/${sessionId}/coseg`, body),
    );
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.get<SessionView>(`/sessions/${sessionId}`);
  }

  /** URL of the latest mask PNG for one image (served by the service). */
  maskUrl(sessionId: string, imageIndex: number): string {
    return `${this.base}/sessions/${sessionId}/mask/${imageIndex}`;
  }

  busy(sessionId: string): boolean {
    return this.inFlight.has(sessionId);
  }

  private async exclusive<T>(sessionId: string, run: () => Promise<T>): Promise<T> {
    if (this.inFlight.has(sessionId)) {
      throw new ApiError(0, 'a request for this session is already in flight');
    }
    this.inFlight.add(sessionId);
    try {
      return await run();
    } finally {
      this.inFlight.delete(sessionId);
    }
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    return this.decode<T>(response);
  }

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`);
    return this.decode<T>(response);
  }

  private async decode<T>(response: Response): Promise<T> {
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const body = (await response.json()) as { detail?: unknown };
        if (body && body.detail !== undefined) detail = String(body.detail);
      } catch {
        // non-JSON error body; keep the status text
        detail = response.statusText || detail;
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }
}
