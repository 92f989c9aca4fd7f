export type MaskLabel = "Mask" | "NoMask";

export type ReviewAction = "SetMask" | "SetNoMask" | "Remove" | "Keep";

export type Box = [number, number, number, number];

export interface ReviewItem {
  face_id: string;
  frame_id: string;
  box: Box;
  context_box: Box;
  current_label: MaskLabel;
  image_url: string;
  status: "pending" | "decided";
}

export interface Progress {
  pending: number;
  decided: number;
  total: number;
}

export interface DecisionAck {
  face_id: string;
  action: ReviewAction;
  reviewer: string;
  timestamp: number;
  duplicate: boolean;
}
